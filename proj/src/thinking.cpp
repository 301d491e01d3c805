// SPDX-License-Identifier: Apache-2.0
#include "futurecall/thinking.hpp"

namespace futurecall {

ToolBinding thinking_tool(std::string name, ThinkingDelegate delegate) {
    ToolBinding b;
    b.name = std::move(name);
    b.behavior = [delegate = std::move(delegate)](const Value& args, std::size_t, ToolState&) -> ToolOutcome {
        auto subquery = args.value("subquery", std::string());
        auto context = args.value("context", std::string());
        try {
            return ToolOutcome::ok(delegate(subquery, context));
        } catch (const std::exception& e) {
            return ToolOutcome::failure(std::string("delegate failed: ") + e.what());
        }
    };
    return b;
}

}  // namespace futurecall
