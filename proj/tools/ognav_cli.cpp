#include "ognav/apiserve.hpp"
#include "ognav/errors.hpp"
#include "ognav/harness.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

namespace fs = std::filesystem;
using namespace ognav;

namespace {

struct Options {
    std::string episodes;
    std::string data = OGNAV_DEFAULT_DATA_DIR;
    std::string planner = "oracle";
    bool no_stm = false;
    bool no_pruner = false;
    bool no_captions = false;
    std::uint64_t seed = 0;
    int steps = 0;
    std::string out;
    double fp = 0.0;
    double fn = 0.0;
    double verify_error = 0.0;
    std::string trace_dir;
    int serve = -1;
    std::string mode = "auto";
    std::string host = "127.0.0.1";
    std::string endpoint = "http://127.0.0.1:8000";
    std::string model = "gpt-4";
    std::vector<std::string> remote_roles;
    std::string transcript_out;
    std::string replay;
    int seeds = 5;
};

RunConfig make_config(const Options& o) {
    RunConfig cfg;
    if (o.planner == "remote") cfg.planner = PlannerKind::remote;
    if (o.mode == "human") cfg.planner = PlannerKind::human;
    cfg.ablations = {o.no_stm, o.no_pruner, o.no_captions};
    cfg.seed = o.seed;
    if (o.steps > 0) cfg.step_budget = o.steps;
    cfg.detector.false_positive_rate = o.fp;
    cfg.detector.miss_rate = o.fn;
    cfg.params.verify_error = o.verify_error;
    cfg.endpoint.base_url = o.endpoint;
    cfg.endpoint.model = o.model;
    for (const auto& r : o.remote_roles) {
        if (r == "pruner") cfg.remote_pruner = true;
        else if (r == "caption") cfg.remote_captions = true;
        else if (r == "verify") cfg.remote_verifier = true;
        else throw CLI::ValidationError("--remote-roles", "unknown role " + r);
    }
    return cfg;
}

int run(const Options& o) {
    const Knowledge knowledge = Knowledge::load(o.data);
    const auto episodes = load_episodes(o.episodes);
    RunConfig cfg = make_config(o);

    std::shared_ptr<Transcript> transcript;
    std::shared_ptr<CompletionBackend> model;
    if (!o.replay.empty()) {
        model = std::make_shared<ReplayBackend>(Transcript::load(o.replay).entries());
    } else if (cfg.planner == PlannerKind::remote) {
        transcript = std::make_shared<Transcript>();
        model = std::make_shared<Gateway>(cfg.endpoint, std::make_unique<HttpTransport>(), transcript);
    }

    std::unique_ptr<LiveEpisode> live;
    std::unique_ptr<ApiServer> server;
    std::shared_ptr<DecisionSource> human;
    if (o.serve >= 0) {
        live = std::make_unique<LiveEpisode>();
        server = std::make_unique<ApiServer>(*live);
        const int port = server->start(o.host, o.serve);
        std::cerr << "serving on http://" << o.host << ':' << port << " (" << o.mode << " mode)\n";
        if (cfg.planner == PlannerKind::human) human = std::make_shared<HumanDecisionSource>(*live);
    } else if (cfg.planner == PlannerKind::human) {
        throw CLI::ValidationError("--mode", "human mode needs --serve");
    }

    std::vector<EpisodeMetrics> metrics;
    for (const auto& ep : episodes) {
        AgentServices services;
        services.model = model;
        services.planner = human;
        services.observer = live.get();
        const auto result = run_episode(ep, cfg, knowledge, services);
        metrics.push_back(result.metrics);
        std::cerr << ep.name << ": " << (result.metrics.success ? "success" : "failure") << " steps=" << result.metrics.steps_taken
                  << " spl=" << format_fraction(result.metrics.spl) << '\n';
        if (!o.trace_dir.empty()) {
            fs::create_directories(o.trace_dir);
            std::ofstream t(fs::path(o.trace_dir) / (ep.name + ".jsonl"));
            write_trace(t, result.trace);
        }
    }
    if (transcript && !o.transcript_out.empty()) transcript->save(o.transcript_out);

    if (!o.out.empty()) {
        std::ofstream f(o.out);
        if (!f) throw Error("cannot write " + o.out);
        write_results_csv(f, metrics);
    } else {
        write_results_csv(std::cout, metrics);
    }
    std::string name = cfg.planner == PlannerKind::human ? "human" : cfg.ablations.name();
    print_table(std::cerr, {{name, aggregate(metrics)}});
    if (live) live->shutdown();
    return 0;
}

int ablate(const Options& o) {
    const Knowledge knowledge = Knowledge::load(o.data);
    const auto episodes = load_episodes(o.episodes);
    RunConfig cfg = make_config(o);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < o.seeds; ++i) seeds.push_back(o.seed + static_cast<std::uint64_t>(i));
    const auto rows = run_ablation_suite(episodes, cfg, knowledge, seeds);
    std::vector<std::pair<std::string, Summary>> table;
    for (const auto& r : rows) table.emplace_back(r.name, r.summary);
    print_table(std::cout, table);
    if (!o.out.empty()) {
        std::ofstream f(o.out);
        for (const auto& r : rows) {
            f << "# " << r.name << '\n';
            write_results_csv(f, r.metrics);
        }
    }
    return 0;
}

int show_scene(const std::string& path) {
    const GridScene scene = GridScene::load(path);
    scene.validate();
    std::cout << scene.name() << ' ' << scene.width() << 'x' << scene.height() << '\n';
    for (int y = scene.height() - 1; y >= 0; --y) {
        for (int x = 0; x < scene.width(); ++x) {
            const Cell c{x, y};
            std::cout << (scene.is_wall(c) ? '#' : scene.is_traversable(c) ? '.' : 'o');
        }
        std::cout << '\n';
    }
    for (const auto& o : scene.objects()) {
        const Room* room = scene.room_at(o.footprint.front());
        std::cout << o.id << '\t' << o.label << '\t' << (room ? room->name : "-") << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Object-goal navigation agent on grid scenes"};
    app.require_subcommand(1);
    Options o;
    std::string scene_path;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--episodes", o.episodes, "episode list")->required()->check(CLI::ExistingFile);
        c->add_option("--data", o.data, "directory with config/ and prompts/")->check(CLI::ExistingDirectory);
        c->add_option("--planner", o.planner, "decision source")->check(CLI::IsMember({"oracle", "remote"}));
        c->add_option("--seed", o.seed, "base seed");
        c->add_option("--steps", o.steps, "step budget override (default: per episode, 500)")->check(CLI::PositiveNumber);
        c->add_option("--out", o.out, "results file");
        c->add_option("--fp", o.fp, "false detections per frame")->check(CLI::NonNegativeNumber);
        c->add_option("--fn", o.fn, "detector miss rate")->check(CLI::Range(0.0, 1.0));
        c->add_option("--verify-error", o.verify_error, "oracle verifier flip rate")->check(CLI::Range(0.0, 1.0));
        c->add_option("--endpoint", o.endpoint, "model server base URL");
        c->add_option("--model", o.model, "model name");
        c->add_option("--remote-roles", o.remote_roles, "also send these roles to the model: pruner, caption, verify")
            ->delimiter(',');
    };

    auto* run_cmd = app.add_subcommand("run", "run episodes and write per-episode metrics");
    add_common(run_cmd);
    run_cmd->add_flag("--no-stm", o.no_stm, "accept the first target detection");
    run_cmd->add_flag("--no-pruner", o.no_pruner, "keep every detection");
    run_cmd->add_flag("--no-captions", o.no_captions, "plan on labels only");
    run_cmd->add_option("--trace-dir", o.trace_dir, "write one JSON-lines trace per episode");
    run_cmd->add_option("--serve", o.serve, "serve live state on this port (0 picks one)");
    run_cmd->add_option("--host", o.host, "bind address for --serve");
    run_cmd->add_option("--mode", o.mode, "auto: planner decides; human: decisions come from POST /decision")
        ->check(CLI::IsMember({"human", "auto"}));
    run_cmd->add_option("--transcript", o.transcript_out, "save model calls as JSON lines");
    run_cmd->add_option("--replay", o.replay, "answer model calls from a saved transcript")->check(CLI::ExistingFile);

    auto* ablate_cmd = app.add_subcommand("ablate", "full agent and the three ablations over several seeds");
    add_common(ablate_cmd);
    ablate_cmd->add_option("--seeds", o.seeds, "number of seeds, starting at --seed")->check(CLI::PositiveNumber);

    auto* scene_cmd = app.add_subcommand("scene", "validate and print a scene file");
    scene_cmd->add_option("file", scene_path)->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);
    try {
        if (run_cmd->parsed()) return run(o);
        if (ablate_cmd->parsed()) return ablate(o);
        return show_scene(scene_path);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
