// mwpipe: synthesize, simulate, extract, replay and validate workload bags.

#include "mwpipe/mwpipe.hpp"

#include <CLI11.hpp>

#include <unistd.h>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

using namespace mwpipe;

struct SynthArgs {
    std::string profile;
    double duration_s = 60.0;
    std::string out;
};

struct SimulateArgs {
    std::string config;
    std::string out;
    std::string tlx = "scripted";
};

struct ExtractArgs {
    std::string bag;
    double window_s = 30.0;
    double stride_s = 1.0;
    double tolerance_ms = 50.0;
    std::string out;
};

struct ReplayArgs {
    std::string bag;
    std::string rate = "max";
    std::string bind;
    std::string out;
    bool recompute = false;
    double window_s = 30.0;
    double stride_s = 1.0;
};

int cmd_synth(const SynthArgs& a) {
    auto profile = config::load_profile(a.profile);
    profile.duration_s = a.duration_s;
    synth::validate(profile);

    Bus bus;
    const auto handles = open_physio_topics(bus, profile.resp_fs_hz);
    bag::BagRecorder recorder(bus, a.out, bag::json{{"kind", "synth"}, {"seed", profile.seed}, {"duration_s", a.duration_s}});
    const Timestamp end{seconds_to_ns(a.duration_s)};
    const auto streams = render_physio(profile, Timestamp{0}, end);
    auto pending = pending_physio(streams, handles);
    Timestamp next_advance{0};
    publish_in_order(bus, pending, [&](Timestamp t) {
        if (t < next_advance) return;
        bus.advance_watermark(t);
        next_advance = Timestamp{t.nanos + kNanosPerSecond};
    });
    bus.close();
    std::cout << "wrote " << recorder.records() << " records to " << a.out << '\n';
    return 0;
}

session::TlxResponse ask_tlx(const session::RunRecord& run) {
    const bool tty = ::isatty(STDIN_FILENO) != 0;
    std::array<int, 6> scales{};
    std::cerr << "TLX for run " << run.run_index << " (" << sim::to_string(run.difficulty) << ", "
              << sim::to_string(run.outcome.status) << "), each scale 0-100\n";
    for (std::size_t i = 0; i < scales.size(); ++i) {
        while (true) {
            std::cerr << "  " << session::kTlxScales[i] << ": " << std::flush;
            std::string line;
            if (!std::getline(std::cin, line)) throw Error(ErrorCode::InvalidArgument, "TLX input ended early");
            std::istringstream in(line);
            int v = -1;
            std::string rest;
            if (in >> v && !(in >> rest) && v >= 0 && v <= 100) {
                scales[i] = v;
                break;
            }
            if (!tty) throw Error(ErrorCode::ScaleOutOfRange, "TLX " + std::string(session::kTlxScales[i]) + " must be an integer in [0, 100]");
            std::cerr << "  enter an integer from 0 to 100\n";
        }
    }
    return session::make_tlx(run.run_index, scales);
}

int cmd_simulate(const SimulateArgs& a) {
    const auto plan = config::load_plan(a.config);
    session::TlxResponder responder;
    if (a.tlx == "interactive") responder = ask_tlx;

    const auto result = session::run_session(plan, a.out, responder);
    std::printf("%-4s %-5s %-15s %9s %9s %8s %7s\n", "run", "level", "status", "duration", "battery", "prompts", "tlx");
    for (const auto& r : result.runs) {
        int sum = 0;
        for (const int s : r.tlx.scales) sum += s;
        std::printf("%-4d %-5s %-15s %8.1fs %8.1f%% %8d %7.1f\n", r.run_index, std::string(sim::to_string(r.difficulty)).c_str(),
                    std::string(sim::to_string(r.outcome.status)).c_str(), r.outcome.duration_s, r.outcome.battery_used_pct,
                    r.outcome.prompt_count, sum / 6.0);
    }
    std::cout << "wrote " << a.out << '\n';
    if (result.aborted) {
        std::cerr << "session aborted: " << result.error << '\n';
        return 1;
    }
    return 0;
}

int cmd_extract(const ExtractArgs& a) {
    csv::ExtractOptions opt;
    opt.features.window_s = a.window_s;
    opt.features.stride_s = a.stride_s;
    if (!(a.tolerance_ms >= 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be >= 0");
    opt.align_tolerance_ns = seconds_to_ns(a.tolerance_ms / 1000.0);
    const auto table = csv::extract_csv(a.bag, a.out, opt);
    for (const auto& w : table.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "wrote " << table.rows.size() << " rows x " << table.columns.size() << " columns to " << a.out << '\n';
    return 0;
}

int cmd_replay(const ReplayArgs& a) {
    bag::ReplayOptions opt;
    if (a.rate != "max") {
        try {
            std::size_t used = 0;
            opt.rate = std::stod(a.rate, &used);
            if (used != a.rate.size()) throw std::invalid_argument(a.rate);
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::InvalidArgument, "--rate must be a positive number or 'max'");
        }
    }

    std::optional<wire::Server> server;
    if (!a.bind.empty()) {
        server.emplace(wire::parse_endpoint(a.bind));
        std::cerr << "listening on port " << server->port() << ", waiting for a client\n";
        server->accept_one();
        server->send(bag::BagReader(a.bag).manifest().to_json().dump());
    }

    Bus bus;
    std::optional<features::BusFeatureEngine> engine;
    std::optional<bag::BagRecorder> recorder;
    if (a.recompute) {
        opt.exclude_prefixes.push_back("feat.");
        opt.watermark_cap = [&] { return engine ? engine->next_emit_lower_bound() : std::nullopt; };
    }
    opt.on_ready = [&](Bus& b) {
        if (a.recompute) {
            features::FeatureConfig fc;
            fc.window_s = a.window_s;
            fc.stride_s = a.stride_s;
            engine.emplace(b, fc);
        }
        if (!a.out.empty()) recorder.emplace(b, a.out, bag::BagReader(a.bag).manifest().session);
        if (server) {
            std::set<std::string> names;
            for (const auto& d : b.topics()) names.insert(d.name);
            b.subscribe(names, [&](const TimedSample& s) { server->send(bag::record_line(s)); });
        }
    };

    const auto stats = bag::replay(a.bag, bus, opt);
    if (engine) engine->finish();
    bus.close();
    if (server) server->close_client();
    for (const auto& w : stats.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "replayed " << stats.published << " records in " << stats.wall_s << " s";
    if (recorder) std::cout << ", wrote " << recorder->records() << " records to " << a.out;
    std::cout << '\n';
    return 0;
}

int cmd_validate(const std::string& path) {
    const auto rep = bag::validate_bag(path);
    for (const auto& e : rep.errors)
        std::cout << "error @" << e.offset << (e.topic.empty() ? "" : " [" + e.topic + "]") << ": " << e.message << '\n';
    for (const auto& w : rep.warnings) std::cout << "warning: " << w << '\n';
    for (const auto& [topic, n] : rep.counts) std::cout << topic << ": " << n << '\n';
    std::cout << rep.records << " records, " << rep.errors.size() << " errors, " << rep.warnings.size() << " warnings\n";
    return rep.ok() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mental-workload data pipeline"};
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth_cmd = app.add_subcommand("synth", "Render a synthetic physiology bag from a profile");
    synth_cmd->add_option("--profile", sa.profile, "Profile JSON file")->required()->check(CLI::ExistingFile);
    synth_cmd->add_option("--duration", sa.duration_s, "Seconds to render")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--out", sa.out, "Output bag")->required();

    SimulateArgs ma;
    auto* sim_cmd = app.add_subcommand("simulate", "Run a full session and record it into one bag");
    sim_cmd->add_option("--config", ma.config, "Session plan JSON file")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("--out", ma.out, "Output bag")->required();
    sim_cmd->add_option("--tlx", ma.tlx, "TLX responder")->check(CLI::IsMember({"interactive", "scripted"}));

    ExtractArgs ea;
    auto* ext_cmd = app.add_subcommand("extract", "Compute the windowed feature table of a bag as CSV");
    ext_cmd->add_option("--bag", ea.bag, "Input bag")->required()->check(CLI::ExistingFile);
    ext_cmd->add_option("--window", ea.window_s, "Window length in seconds")->check(CLI::PositiveNumber);
    ext_cmd->add_option("--stride", ea.stride_s, "Stride in seconds")->check(CLI::PositiveNumber);
    ext_cmd->add_option("--tolerance-ms", ea.tolerance_ms, "Telemetry alignment tolerance");
    ext_cmd->add_option("--out", ea.out, "Output CSV")->required();

    ReplayArgs ra;
    auto* rep_cmd = app.add_subcommand("replay", "Republish a bag onto a bus");
    rep_cmd->add_option("--bag", ra.bag, "Input bag")->required()->check(CLI::ExistingFile);
    rep_cmd->add_option("--rate", ra.rate, "Speed factor, or 'max' for no pacing");
    rep_cmd->add_option("--bind", ra.bind, "Serve records to one client at HOST:PORT");
    rep_cmd->add_option("--out", ra.out, "Record the replayed bus into a new bag");
    rep_cmd->add_flag("--recompute-features", ra.recompute, "Drop recorded feat.* topics and recompute them live");
    rep_cmd->add_option("--window", ra.window_s, "Window length for recomputed features")->check(CLI::PositiveNumber);
    rep_cmd->add_option("--stride", ra.stride_s, "Stride for recomputed features")->check(CLI::PositiveNumber);

    std::string validate_path;
    auto* val_cmd = app.add_subcommand("validate", "Check a bag's structure and contents");
    val_cmd->add_option("--bag", validate_path, "Input bag")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth_cmd) return cmd_synth(sa);
        if (*sim_cmd) return cmd_simulate(ma);
        if (*ext_cmd) return cmd_extract(ea);
        if (*rep_cmd) return cmd_replay(ra);
        if (*val_cmd) return cmd_validate(validate_path);
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
