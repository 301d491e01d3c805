// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>

#include "futurecall/executor.hpp"

namespace futurecall {

/// Answers one delegated subquery given a context excerpt.
using ThinkingDelegate = std::function<std::string(const std::string& subquery, const std::string& context)>;

/// A delegated thinking turn exposed as an ordinary long-latency tool. The
/// call's `subquery` and optional `context` arguments go to the delegate and
/// its answer becomes the result; delegate exceptions surface as execution
/// errors.
ToolBinding thinking_tool(std::string name, ThinkingDelegate delegate);

}  // namespace futurecall
