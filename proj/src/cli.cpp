// SPDX-License-Identifier: Apache-2.0
#include "futurecall/cli.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "futurecall/driver.hpp"
#include "futurecall/live_decoder.hpp"
#include "futurecall/workload.hpp"

namespace futurecall {

namespace {

struct StaticAccess {
    std::vector<std::string> segments;
    bool subtree = false;
    bool write = false;
};

bool wildcard(const std::string& seg) { return seg.size() >= 2 && seg.front() == '{' && seg.back() == '}'; }

std::vector<StaticAccess> static_accesses(const std::optional<DependencyAnnotation>& a) {
    if (!a)
        return {StaticAccess{{}, true, true}};
    std::vector<StaticAccess> out;
    auto add = [&out](const PathSpec& p, bool write) {
        if (p.path.starts_with("$session")) {
            out.push_back({{}, true, write});
            return;
        }
        StaticAccess s;
        s.subtree = p.subtree;
        s.write = write;
        std::stringstream ss(p.path);
        for (std::string seg; std::getline(ss, seg, '/');)
            if (!seg.empty())
                s.segments.push_back(seg);
        out.push_back(std::move(s));
    };
    for (const auto& p : a->reads)
        add(p, false);
    for (const auto& p : a->writes)
        add(p, true);
    return out;
}

bool static_overlap(const StaticAccess& a, const StaticAccess& b) {
    auto n = std::min(a.segments.size(), b.segments.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& x = a.segments[i];
        const auto& y = b.segments[i];
        if (x != y && !wildcard(x) && !wildcard(y))
            return false;
    }
    if (a.segments.size() == b.segments.size())
        return true;
    return a.segments.size() < b.segments.size() ? a.subtree : b.subtree;
}

bool static_conflict(const SchemaEntry& a, const SchemaEntry& b) {
    bool asw = a.annotation && a.annotation->session_write;
    bool bsw = b.annotation && b.annotation->session_write;
    bool asr = a.annotation && a.annotation->session_read;
    bool bsr = b.annotation && b.annotation->session_read;
    if ((asw && (bsr || bsw)) || (bsw && asr))
        return true;
    for (const auto& x : static_accesses(a.annotation))
        for (const auto& y : static_accesses(b.annotation))
            if ((x.write || y.write) && static_overlap(x, y))
                return true;
    return false;
}

Value read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open " + path);
    try {
        return Value::parse(in);
    } catch (const Value::parse_error& e) {
        throw ParseError("malformed JSON in " + path + ": " + e.what());
    }
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << text;
}

Value savings_json(const analysis::SavingsReport& s) {
    return {{"delta_ff", s.delta_ff}, {"delta_de", s.delta_de}, {"t_saving", s.t_saving},
            {"s_m", s.s_m},           {"s_e", s.s_e},           {"d_e", s.d_e},
            {"d_union", s.d_union}};
}

struct RunOptions {
    std::string workload;
    std::string mode;
    std::string clock = "virtual";
    std::optional<double> delay_scale;
    std::uint64_t seed = 0;
    std::string out_trace;
    std::string out_report;
    std::string dump_context;
    bool live = false;
    bool strict_cancel = false;
};

RunConfig make_config(const RunOptions& o, const WorkloadSpec& spec, const std::string& mode) {
    RunConfig c;
    try {
        c.mode = parse_run_mode(mode.empty() ? spec.mode.value_or("async-parallel") : mode);
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    if (o.clock == "wall")
        c.clock = ClockKind::wall;
    else if (o.clock != "virtual")
        throw ValidationError("clock must be virtual or wall");
    c.seconds_per_unit = o.delay_scale.value_or(spec.delay_scale);
    if (!(*c.seconds_per_unit > 0))
        throw ValidationError("delay scale must be positive");
    c.policy = o.strict_cancel ? CancelPolicy::strict : CancelPolicy::consuming;
    return c;
}

RunTrace execute(const RunOptions& o, const WorkloadSpec& spec, const RunConfig& config) {
    if (!o.live)
        return run_conversation(spec, config);
    if (config.clock != ClockKind::wall)
        throw ValidationError("the live decoder needs --clock wall");
    auto live = LiveConfig::from_environment();
    if (!live)
        throw ValidationError("FUTURECALL_ENDPOINT is not set");
    std::vector<FunctionSchema> schemas;
    for (const auto& t : spec.tools)
        schemas.push_back(t.schema);
    ChatCompletionsDecoder decoder(*live, schemas, config.mode);
    auto tools = make_tool_registry(spec);
    return run_conversation(spec, config, decoder, tools);
}

int cmd_run(const RunOptions& o, std::ostream& out) {
    auto spec = load_workload(o.workload);
    auto config = make_config(o, spec, o.mode);
    auto trace = execute(o, spec, config);

    if (!o.out_trace.empty()) {
        std::ofstream f(o.out_trace);
        if (!f)
            throw std::runtime_error("cannot write " + o.out_trace);
        write_jsonl(f, trace);
    }
    if (!o.dump_context.empty())
        write_file(o.dump_context, context_json(trace).dump(2) + "\n");
    auto summary = summary_json(trace);
    summary["seed"] = o.seed;
    auto in = trace_to_inputs(trace);
    summary["savings"] = savings_json(analysis::savings_decomposition(in.decode, in.exec));
    if (!o.out_report.empty())
        write_file(o.out_report, summary.dump(2) + "\n");
    out << "mode " << trace.mode << "  end_to_end " << trace.end_to_end << "  t_llm " << in.t_llm
        << "  t_tool " << in.t_tool << "  t_cp " << in.t_cp << "\n";
    return kExitOk;
}

struct CompareOptions {
    RunOptions run;
    std::vector<std::string> modes;
    std::vector<double> sweep;
    std::string out_csv;
};

int cmd_compare(const CompareOptions& o, std::ostream& out, std::ostream& err) {
    if (o.modes.size() < 2)
        throw ValidationError("compare needs at least two modes");
    auto base = load_workload(o.run.workload);
    std::vector<std::pair<std::optional<double>, WorkloadSpec>> cells;
    if (o.sweep.empty()) {
        cells.emplace_back(std::nullopt, base);
    } else {
        for (auto d : o.sweep)
            if (!(d > 0))
                throw ValidationError("sweep delays must be positive");
        auto specs = make_latency_sweep(base, o.sweep);
        for (std::size_t i = 0; i < specs.size(); ++i)
            cells.emplace_back(o.sweep[i], std::move(specs[i]));
    }

    std::ostringstream csv;
    csv << "delay,mode,end_to_end,speedup,t_llm,t_tool,t_cp,delta_ff,delta_de,t_saving,bound,regime\n";
    Value report = Value::array();
    bool violated = false;
    for (const auto& [delay, spec] : cells) {
        std::optional<TraceInputs> base_in;
        double base_e2e = 0;
        for (const auto& mode : o.modes) {
            auto config = make_config(o.run, spec, mode);
            auto trace = execute(o.run, spec, config);
            auto in = trace_to_inputs(trace);
            auto savings = analysis::savings_decomposition(in.decode, in.exec);
            if (!base_in) {
                base_in = in;
                base_e2e = trace.end_to_end;
            }
            double speedup = base_e2e / trace.end_to_end;
            double bound = analysis::ideal_speedup(base_in->t_llm, base_in->t_tool, in.t_cp);
            double cell_limit = base_e2e / std::max(in.t_llm, in.t_cp);
            if (speedup > cell_limit + 1e-9) {
                violated = true;
                err << "bound violation: " << mode << " speedup " << speedup << " exceeds " << cell_limit << "\n";
            }
            auto regime = analysis::to_string(analysis::classify_regime(in.t_llm, in.t_tool, in.t_cp));
            std::string d = delay ? (std::ostringstream() << *delay).str() : "";
            csv << d << ',' << mode << ',' << trace.end_to_end << ',' << speedup << ',' << in.t_llm << ','
                << in.t_tool << ',' << in.t_cp << ',' << savings.delta_ff << ',' << savings.delta_de << ','
                << savings.t_saving << ',' << bound << ',' << regime << '\n';
            out << std::left << std::setw(8) << (d.empty() ? "-" : d) << std::setw(18) << mode << " e2e "
                << std::setw(8) << trace.end_to_end << " speedup " << std::setw(8) << std::setprecision(4)
                << speedup << " bound " << std::setw(8) << bound << " dFF " << std::setw(8) << savings.delta_ff
                << " dDE " << std::setw(8) << savings.delta_de << " " << regime << "\n";
            Value cell{{"mode", mode},          {"end_to_end", trace.end_to_end},
                       {"speedup", speedup},    {"t_llm", in.t_llm},
                       {"t_tool", in.t_tool},   {"t_cp", in.t_cp},
                       {"savings", savings_json(savings)}, {"ideal_bound", bound},
                       {"regime", regime}};
            if (delay)
                cell["delay"] = *delay;
            report.push_back(cell);
        }
    }
    if (!o.out_csv.empty())
        write_file(o.out_csv, csv.str());
    if (!o.run.out_report.empty())
        write_file(o.run.out_report, report.dump(2) + "\n");
    if (violated)
        throw std::runtime_error("measured speedup exceeds the ideal bound");
    return kExitOk;
}

int cmd_validate(const std::string& predicted_path, const std::string& truth_path, std::ostream& out) {
    std::vector<SchemaEntry> predicted, truth;
    try {
        predicted = load_schema_document(read_json_file(predicted_path));
        truth = load_schema_document(read_json_file(truth_path));
    } catch (const InvalidSchema& e) {
        throw ValidationError(e.what());
    }
    std::map<std::string, std::string> pu, tu;
    for (const auto& e : predicted)
        pu[e.schema.name] = e.group;
    for (const auto& e : truth)
        tu[e.schema.name] = e.group;
    if (pu != tu)
        throw ValidationError("predicted and truth files describe different tool universes");

    auto p = static_conflicts(predicted);
    auto t = static_conflicts(truth);
    auto c = analysis::annotation_confusion(p.pairs, t.pairs, t.universe);
    out << std::fixed << std::setprecision(3);
    out << "pairs      " << t.universe << "\n"
        << "tp/fp/fn/tn " << c.tp << "/" << c.fp << "/" << c.fn << "/" << c.tn << "\n"
        << "accuracy   " << c.accuracy << "\n"
        << "precision  " << c.precision << "\n"
        << "recall     " << c.recall << "\n"
        << "fp_rate    " << c.fp_rate << "\n"
        << "fn_rate    " << c.fn_rate << "\n";
    return kExitOk;
}

int cmd_analyze(const std::string& path, std::ostream& out) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open trace " + path);
    auto trace = read_jsonl(in);
    auto ti = trace_to_inputs(trace);
    auto s = analysis::savings_decomposition(ti.decode, ti.exec);
    Value j{{"mode", trace.mode},
            {"end_to_end", trace.end_to_end},
            {"t_llm", ti.t_llm},
            {"t_tool", ti.t_tool},
            {"t_cp", ti.t_cp},
            {"savings", savings_json(s)},
            {"ideal_speedup", analysis::ideal_speedup(ti.t_llm, ti.t_tool, ti.t_cp)},
            {"regime", analysis::to_string(analysis::classify_regime(ti.t_llm, ti.t_tool, ti.t_cp))}};
    out << j.dump(2) << "\n";
    return kExitOk;
}

}  // namespace

StaticConflicts static_conflicts(const std::vector<SchemaEntry>& tools) {
    StaticConflicts out;
    for (const auto& a : tools)
        for (const auto& b : tools) {
            if (a.group != b.group)
                continue;
            ++out.universe;
            if (static_conflict(a, b))
                out.pairs.emplace(a.schema.name, b.schema.name);
        }
    return out;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Asynchronous function-calling runtime and simulator", "futurecall"};
    app.require_subcommand(1);

    RunOptions run;
    auto add_run_flags = [](CLI::App* cmd, RunOptions& o) {
        cmd->add_option("--workload", o.workload, "workload JSON file")->required();
        cmd->add_option("--clock", o.clock, "virtual or wall");
        cmd->add_option("--delay-scale", o.delay_scale, "wall seconds per time unit");
        cmd->add_option("--seed", o.seed, "seed recorded in the report");
        cmd->add_option("--out-report", o.out_report, "summary JSON path");
        cmd->add_flag("--live", o.live, "decode with the chat-completions endpoint from the environment");
        cmd->add_flag("--strict-cancel", o.strict_cancel, "cancel across every ordering edge");
    };
    auto* run_cmd = app.add_subcommand("run", "run one workload under one mode");
    add_run_flags(run_cmd, run);
    run_cmd->add_option("--mode", run.mode, "sync-sequential|sync-parallel|async-sequential|async-parallel");
    run_cmd->add_option("--out-trace", run.out_trace, "trace JSONL path");
    run_cmd->add_option("--dump-context", run.dump_context, "context JSON path");

    CompareOptions cmp;
    auto* cmp_cmd = app.add_subcommand("compare", "run several modes and report speedups");
    add_run_flags(cmp_cmd, cmp.run);
    cmp_cmd->add_option("--mode", cmp.modes, "modes; the first is the baseline")->required()->delimiter(',');
    cmp_cmd->add_option("--sweep", cmp.sweep, "per-call delays to sweep")->delimiter(',');
    cmp_cmd->add_option("--out-csv", cmp.out_csv, "CSV series path");

    std::string predicted, truth;
    auto* val_cmd = app.add_subcommand("validate-annotations", "compare annotation conflict sets");
    val_cmd->add_option("--predicted", predicted, "predicted schema file")->required();
    val_cmd->add_option("--truth", truth, "ground-truth schema file")->required();

    std::string trace_path;
    auto* ana_cmd = app.add_subcommand("analyze", "compute latency metrics of a trace");
    ana_cmd->add_option("--trace", trace_path, "trace JSONL path")->required();

    std::uint64_t gen_seed = 0;
    std::size_t gen_calls = 6;
    bool gen_plain = false;
    auto* gen_cmd = app.add_subcommand("generate", "print a random workload");
    gen_cmd->add_option("--seed", gen_seed, "generator seed");
    gen_cmd->add_option("--calls", gen_calls, "maximum number of calls");
    gen_cmd->add_flag("--no-annotations", gen_plain, "omit dependency annotations");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (run_cmd->parsed())
            return cmd_run(run, out);
        if (cmp_cmd->parsed())
            return cmd_compare(cmp, out, err);
        if (val_cmd->parsed())
            return cmd_validate(predicted, truth, out);
        if (ana_cmd->parsed())
            return cmd_analyze(trace_path, out);
        if (gen_cmd->parsed()) {
            GeneratorOptions g;
            g.max_calls = gen_calls;
            g.annotate = !gen_plain;
            out << to_json(random_workload(gen_seed, g)).dump(2) << "\n";
            return kExitOk;
        }
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitRuntime;
}

}  // namespace futurecall
