// fp3d command-line driver.
//
// Exit codes: 0 ok, 1 usage, 2 bad input data, 3 runtime failure.

#include "fp3d/approximator.hpp"
#include "fp3d/environment.hpp"
#include "fp3d/netlist.hpp"
#include "fp3d/pipeline.hpp"
#include "fp3d/render.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace {

using namespace fp3d;
using Json = nlohmann::ordered_json;

struct UsageError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};
struct RuntimeFailure : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct Globals
{
    std::uint64_t seed = 0;
    int jobs = 1;
};

std::string read_file(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string &path, const std::string &text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(text.data(), std::streamsize(text.size())))
        throw DataError("cannot write " + path);
}

Netlist load_netlist(const std::string &path)
{
    try {
        return parse_canonical(read_file(path));
    } catch (const ParseError &e) {
        throw DataError(path + ": " + e.what());
    }
}

std::vector<Trajectory> load_trajectories(const std::string &path)
{
    std::istringstream in(read_file(path));
    std::vector<Trajectory> out;
    try {
        out = read_trajectories(in);
    } catch (const std::exception &e) {
        throw DataError(path + ": " + e.what());
    }
    if (out.empty())
        throw DataError(path + ": no trajectories");
    return out;
}

NetParams load_params(const std::string &path, Role role)
{
    std::istringstream in(read_file(path));
    try {
        NetParams p = read_checkpoint(in);
        if (p.role() != role)
            throw DataError(path + ": expected a " + std::string(to_string(role)) + " checkpoint");
        return p;
    } catch (const DataError &) {
        throw;
    } catch (const std::exception &e) {
        throw DataError(path + ": " + e.what());
    }
}

CanvasConfig parse_canvas(const std::string &text)
{
    try {
        return CanvasConfig::parse(text);
    } catch (const std::exception &e) {
        throw UsageError(std::string("--canvas: ") + e.what());
    }
}

Environment make_env(Netlist netlist, const CanvasConfig &cfg)
{
    try {
        return Environment(std::move(netlist), cfg);
    } catch (const std::invalid_argument &e) {
        throw DataError(e.what());
    }
}

/// The environment the trajectories were generated in; the netlist must be
/// the one they were recorded on.
Environment env_for(const std::string &netlist_path, const std::vector<Trajectory> &trajs)
{
    Netlist n = load_netlist(netlist_path);
    const std::string hash = content_hash(n);
    for (const auto &t : trajs)
        if (t.hash != hash || t.canvas != trajs.front().canvas)
            throw DataError("trajectories were not generated from " + netlist_path + " on a single canvas");
    return make_env(std::move(n), trajs.front().canvas);
}

Rtg parse_prompt(const std::string &text)
{
    Rtg out{};
    std::size_t start = 0;
    for (int d = 0; d < 3; ++d) {
        const auto end = d < 2 ? text.find(',', start) : text.size();
        if (end == std::string::npos)
            throw UsageError("--prompt must be w,c,h");
        const char *first = text.data() + start;
        const char *last = text.data() + end;
        auto [ptr, ec] = std::from_chars(first, last, out[d]);
        if (ec != std::errc() || ptr != last)
            throw UsageError("--prompt must be three numbers w,c,h, got '" + text + "'");
        start = end + 1;
    }
    return out;
}

Json triple(const Rtg &v) { return Json::array({v[0], v[1], v[2]}); }

Json metrics_json(const PlacementMetrics &m)
{
    return {{"total_wirelength", m.total_wirelength},
            {"max_congestion", m.max_congestion},
            {"max_heat", m.max_heat}};
}

// ---------------------------------------------------------------------------
// Commands

struct GenArgs
{
    std::string netlist, out, canvas = "48x48x3";
    int count = 200;
};

int cmd_gen(const GenArgs &a, const Globals &g)
{
    Environment env = make_env(load_netlist(a.netlist), parse_canvas(a.canvas));
    std::vector<Trajectory> trajs;
    try {
        trajs = gen_random(env, a.count, g.seed, g.jobs);
    } catch (const RetryBudgetExhausted &e) {
        throw RuntimeFailure(e.what());
    }
    std::ostringstream os;
    write_trajectories(os, trajs);
    write_file(a.out, os.str());
    const auto st = dataset_stats(trajs);
    std::cout << "wrote " << trajs.size() << " episodes to " << a.out << "\n"
              << "return mean " << triple(st.mean).dump() << " stddev " << triple(st.stddev).dump() << "\n";
    return 0;
}

struct StatsArgs
{
    std::string traj;
};

int cmd_stats(const StatsArgs &a, const Globals &)
{
    const auto trajs = load_trajectories(a.traj);
    const auto st = dataset_stats(trajs);
    double wl = 0.0, cong = 0.0, heat = 0.0;
    for (const auto &t : trajs) {
        wl += t.totals.total_wirelength;
        cong += t.totals.max_congestion;
        heat += t.totals.max_heat;
    }
    const double n = double(trajs.size());
    Json doc{{"episodes", trajs.size()},
             {"netlist", trajs.front().netlist},
             {"canvas", trajs.front().canvas.to_string()},
             {"return_mean", triple(st.mean)},
             {"return_stddev", triple(st.stddev)},
             {"prompt", triple(make_prompt(st))},
             {"mean_totals", metrics_json({wl / n, cong / n, heat / n})}};
    std::cout << doc.dump(2) << "\n";
    return 0;
}

struct TrainArgs
{
    std::string role, netlist, traj, out, loss_csv, heldout;
    int epochs = 200;
    int batch_size = 64;
    int hidden = kDefaultHidden;
    double lr = 0.0;
};

int cmd_train(const TrainArgs &a, const Globals &g)
{
    const Role role = parse_role(a.role);
    const auto trajs = load_trajectories(a.traj);
    const Environment env = env_for(a.netlist, trajs);
    const auto stats = dataset_stats(trajs);
    const Dataset data = build_dataset(role, env, trajs, stats);
    std::optional<Dataset> held;
    if (!a.heldout.empty()) {
        const auto h = load_trajectories(a.heldout);
        (void)env_for(a.netlist, h);
        held = build_dataset(role, env, h, stats);
    }

    TrainConfig cfg;
    cfg.epochs = a.epochs;
    cfg.batch_size = a.batch_size;
    cfg.hidden = a.hidden;
    cfg.seed = g.seed;
    cfg.adam.learning_rate = a.lr > 0.0 ? a.lr : default_learning_rate(role);
    const auto result = train(role, data, cfg, held ? &*held : nullptr);

    std::ostringstream ckpt;
    write_checkpoint(ckpt, result.params);
    write_file(a.out, ckpt.str());

    std::ostringstream csv;
    csv << (held ? "epoch,loss,heldout\n" : "epoch,loss\n");
    for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
        csv << e + 1 << ',' << Json(result.loss_curve[e]).dump();
        if (held)
            csv << ',' << Json(result.heldout_curve[e]).dump();
        csv << '\n';
    }
    if (!a.loss_csv.empty())
        write_file(a.loss_csv, csv.str());
    std::cout << csv.str() << "wrote " << to_string(role) << " checkpoint to " << a.out << "\n";
    return 0;
}

struct PolicyArgs
{
    std::string netlist, traj, actor, critic;
    int k = 5;
};

struct LoadedPolicy
{
    std::unique_ptr<Environment> env;
    std::vector<Trajectory> trajs;
    NetParams actor{Role::actor, 1, 1, 1};
    NetParams critic{Role::critic, 1, 1, 1};
    Policy policy;
};

LoadedPolicy load_policy(const PolicyArgs &a)
{
    LoadedPolicy lp;
    lp.trajs = load_trajectories(a.traj);
    lp.env = std::make_unique<Environment>(env_for(a.netlist, lp.trajs));
    lp.actor = load_params(a.actor, Role::actor);
    lp.critic = load_params(a.critic, Role::critic);
    lp.policy.env = lp.env.get();
    lp.policy.actor = &lp.actor;
    lp.policy.critic = &lp.critic;
    lp.policy.stats = dataset_stats(lp.trajs);
    lp.policy.k = a.k;
    const int flen = feature_length(lp.env->canvas());
    if (lp.actor.in_dim() != flen || lp.critic.in_dim() != flen + 3)
        throw DataError("checkpoints do not match the " + lp.env->canvas().to_string() + " canvas");
    return lp;
}

struct PlaceArgs
{
    PolicyArgs policy;
    std::string prompt, out, metrics, svg;
    int samples = 3;
};

int cmd_place(const PlaceArgs &a, const Globals &g)
{
    LoadedPolicy lp = load_policy(a.policy);
    const Rtg prompt = a.prompt.empty() ? make_prompt(lp.policy.stats) : parse_prompt(a.prompt);
    const auto runs = sample_rollouts(lp.policy, prompt, a.samples, g.seed, g.jobs);
    std::vector<Trajectory> trajs;
    for (const auto &r : runs)
        trajs.push_back(r.trajectory);
    std::size_t best = 0;
    try {
        best = best_of_n(trajs);
    } catch (const std::runtime_error &e) {
        throw RuntimeFailure(e.what());
    }
    const auto &placement = runs[best].final_state.positions();
    write_file(a.out, placement_to_json(lp.env->netlist(), placement));

    Json doc{{"netlist", lp.env->netlist().name},
             {"canvas", lp.env->canvas().to_string()},
             {"prompt", triple(prompt)},
             {"k", a.policy.k},
             {"best", best}};
    Json all = Json::array();
    for (const auto &t : trajs) {
        Json row = metrics_json(t.totals);
        row["failed"] = t.failed;
        all.push_back(row);
    }
    doc["runs"] = all;
    doc["result"] = metrics_json(trajs[best].totals);
    if (!a.metrics.empty())
        write_file(a.metrics, doc.dump(2) + "\n");
    if (!a.svg.empty())
        write_file(a.svg, render_svg(lp.env->netlist(), lp.env->canvas(), placement));
    std::cout << doc.dump(2) << "\n";
    return 0;
}

struct EvalArgs
{
    std::string netlist, canvas = "48x48x3", placement, critic, traj, heldout, out;
};

int cmd_eval(const EvalArgs &a, const Globals &)
{
    if (!a.placement.empty()) {
        Environment env = make_env(load_netlist(a.netlist), parse_canvas(a.canvas));
        Placement p;
        try {
            p = placement_from_json(env.netlist(), read_file(a.placement));
        } catch (const ParseError &e) {
            throw DataError(a.placement + ": " + e.what());
        }
        if (auto problem = placement_problem(env.netlist(), env.canvas(), p))
            throw DataError(a.placement + ": " + *problem);
        std::vector<Anchor> actions;
        for (int id : env.order()) {
            if (!p[id])
                throw DataError(a.placement + ": module '" + env.netlist().modules[id].name + "' is not placed");
            actions.push_back(*p[id]);
        }
        const auto m = env.metrics(env.replay(actions));
        const std::string text = metrics_json(m).dump(2) + "\n";
        if (!a.out.empty())
            write_file(a.out, text);
        std::cout << text;
        return 0;
    }
    if (a.critic.empty() || a.traj.empty() || a.heldout.empty())
        throw UsageError("eval needs --placement, or --critic with --traj and --heldout");
    const auto trajs = load_trajectories(a.traj);
    const Environment env = env_for(a.netlist, trajs);
    const auto held = load_trajectories(a.heldout);
    (void)env_for(a.netlist, held);
    const NetParams critic = load_params(a.critic, Role::critic);
    if (critic.in_dim() != feature_length(env.canvas()) + 3)
        throw DataError("critic checkpoint does not match the " + env.canvas().to_string() + " canvas");
    const auto curve = critic_error_study(env, critic, dataset_stats(trajs), held);
    std::ostringstream os;
    write_error_csv(os, curve);
    if (!a.out.empty())
        write_file(a.out, os.str());
    std::cout << os.str();
    return 0;
}

struct BoundArgs
{
    PolicyArgs policy;
    std::string component = "w", out, prompt;
    int rollouts = 1;
    int max_actions = kMaxBoundActions;
    double noise = kBestOfNoise;
};

int cmd_bound_check(const BoundArgs &a, const Globals &g)
{
    // Refuse oversized canvases before loading any model.
    {
        const auto trajs = load_trajectories(a.policy.traj);
        const Environment env = env_for(a.policy.netlist, trajs);
        const auto first = env.legal_actions(env.reset()).size();
        if (int(first) > a.max_actions)
            throw RuntimeFailure("bound-check: " + std::to_string(first) + " legal actions on the " +
                                 env.canvas().to_string() + " canvas exceed the exhaustive-scan limit of " +
                                 std::to_string(a.max_actions));
    }
    LoadedPolicy lp = load_policy(a.policy);
    const Rtg prompt = a.prompt.empty() ? make_prompt(lp.policy.stats) : parse_prompt(a.prompt);
    const int component = a.component == "w" ? 0 : a.component == "c" ? 1 : 2;
    BoundReport all;
    try {
        for (int r = 0; r < a.rollouts; ++r) {
            auto rep = bound_check(lp.policy, prompt, component, derive_seed(g.seed, std::uint64_t(r), 11), a.noise,
                                   a.max_actions);
            all.steps.insert(all.steps.end(), rep.steps.begin(), rep.steps.end());
        }
    } catch (const ActionSpaceTooLarge &e) {
        throw RuntimeFailure(e.what());
    }
    std::ostringstream os;
    write_bound_csv(os, all);
    if (!a.out.empty())
        write_file(a.out, os.str());
    else
        std::cout << os.str();
    std::cout << "component " << a.component << ": " << all.steps.size() << " steps, holds fraction "
              << Json(all.holds_fraction()).dump() << ", triangle fraction " << Json(all.triangle_fraction()).dump()
              << "\n";
    return 0;
}

struct RenderArgs
{
    std::string netlist, canvas = "48x48x3", placement, out;
};

int cmd_render(const RenderArgs &a, const Globals &)
{
    const Netlist n = load_netlist(a.netlist);
    const CanvasConfig cfg = parse_canvas(a.canvas);
    Placement p;
    try {
        p = placement_from_json(n, read_file(a.placement));
    } catch (const ParseError &e) {
        throw DataError(a.placement + ": " + e.what());
    }
    try {
        write_file(a.out, render_svg(n, cfg, p));
    } catch (const std::invalid_argument &e) {
        throw DataError(e.what());
    }
    std::cout << "wrote " << a.out << "\n";
    return 0;
}

struct ConvertArgs
{
    std::string blocks, nets, out, name, canvas = "48x48x3";
};

int cmd_convert(const ConvertArgs &a, const Globals &)
{
    Netlist n;
    try {
        n = parse_gsrc(read_file(a.blocks), read_file(a.nets), parse_canvas(a.canvas));
    } catch (const ParseError &e) {
        throw DataError(e.what());
    }
    n.name = a.name.empty() ? std::filesystem::path(a.blocks).stem().string() : a.name;
    write_file(a.out, serialize_canonical(n));
    std::cout << "wrote " << n.size() << " modules and " << n.nets.size() << " nets to " << a.out << "\n";
    return 0;
}

const auto kAtLeastOne = CLI::Range(1, std::numeric_limits<int>::max());

void add_policy_options(CLI::App *cmd, PolicyArgs &p)
{
    cmd->add_option("--netlist", p.netlist, "Canonical netlist JSON")->required();
    cmd->add_option("--traj", p.traj, "Training trajectories (RTG statistics and canvas)")->required();
    cmd->add_option("--actor", p.actor, "Actor checkpoint")->required();
    cmd->add_option("--critic", p.critic, "Critic checkpoint")->required();
    cmd->add_option("--k", p.k, "Nearest legal anchors considered per step")->check(kAtLeastOne);
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"3D floorplanning with a return-conditioned actor and critic"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "TOML file with option values; command-line flags win");
    Globals g;
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--jobs", g.jobs, "Worker threads")->check(kAtLeastOne);

    GenArgs gen;
    auto *c_gen = app.add_subcommand("gen", "Generate random placement trajectories");
    c_gen->add_option("--netlist", gen.netlist, "Canonical netlist JSON")->required();
    c_gen->add_option("--canvas", gen.canvas, "Canvas WxHxZ");
    c_gen->add_option("--count", gen.count, "Episodes")->check(kAtLeastOne);
    c_gen->add_option("--out", gen.out, "Output JSONL")->required();

    StatsArgs stats;
    auto *c_stats = app.add_subcommand("stats", "Summarize a trajectory file");
    c_stats->add_option("--traj", stats.traj, "Trajectory JSONL")->required();

    TrainArgs tr;
    auto *c_train = app.add_subcommand("train", "Train the actor or the critic");
    c_train->add_option("--role", tr.role, "actor or critic")->required()->check(CLI::IsMember({"actor", "critic"}));
    c_train->add_option("--netlist", tr.netlist, "Netlist the trajectories were generated from")->required();
    c_train->add_option("--traj", tr.traj, "Training trajectories")->required();
    c_train->add_option("--heldout", tr.heldout, "Held-out trajectories for a validation curve");
    c_train->add_option("--epochs", tr.epochs, "Epochs")->check(kAtLeastOne);
    c_train->add_option("--batch-size", tr.batch_size, "Minibatch size")->check(kAtLeastOne);
    c_train->add_option("--hidden", tr.hidden, "Hidden layer width")->check(kAtLeastOne);
    c_train->add_option("--lr", tr.lr, "Learning rate (default 5e-4 actor, 5e-3 critic)")
            ->check(CLI::PositiveNumber);
    c_train->add_option("--out", tr.out, "Checkpoint path")->required();
    c_train->add_option("--loss-csv", tr.loss_csv, "Write the loss curve as CSV");

    PlaceArgs pl;
    auto *c_place = app.add_subcommand("place", "Place a netlist with trained models");
    add_policy_options(c_place, pl.policy);
    c_place->add_option("--samples", pl.samples, "Rollouts; the shortest wirelength wins")
            ->check(kAtLeastOne);
    c_place->add_option("--prompt", pl.prompt, "Target return w,c,h (default mean + 3 stddev on w)");
    c_place->add_option("--out", pl.out, "Placement JSON")->required();
    c_place->add_option("--metrics", pl.metrics, "Metrics JSON");
    c_place->add_option("--svg", pl.svg, "SVG rendering");

    EvalArgs ev;
    auto *c_eval = app.add_subcommand("eval", "Score a placement, or a critic on held-out trajectories");
    c_eval->add_option("--netlist", ev.netlist, "Canonical netlist JSON")->required();
    c_eval->add_option("--canvas", ev.canvas, "Canvas WxHxZ (placement mode)");
    c_eval->add_option("--placement", ev.placement, "Placement JSON");
    c_eval->add_option("--critic", ev.critic, "Critic checkpoint");
    c_eval->add_option("--traj", ev.traj, "Training trajectories (RTG statistics)");
    c_eval->add_option("--heldout", ev.heldout, "Held-out trajectories");
    c_eval->add_option("--out", ev.out, "Output file");

    BoundArgs bc;
    auto *c_bound = app.add_subcommand("bound-check", "Check the per-step error bound by exhaustive scan");
    add_policy_options(c_bound, bc.policy);
    c_bound->add_option("--component", bc.component, "w, c or h")->check(CLI::IsMember({"w", "c", "h"}));
    c_bound->add_option("--rollouts", bc.rollouts, "Seeded rollouts")->check(kAtLeastOne);
    c_bound->add_option("--noise", bc.noise, "Proposal jitter")->check(CLI::NonNegativeNumber);
    c_bound->add_option("--max-actions", bc.max_actions, "Largest legal set to scan")->check(kAtLeastOne);
    c_bound->add_option("--prompt", bc.prompt, "Target return w,c,h");
    c_bound->add_option("--out", bc.out, "CSV report (default stdout)");

    RenderArgs rd;
    auto *c_render = app.add_subcommand("render", "Render a placement as SVG");
    c_render->add_option("--netlist", rd.netlist, "Canonical netlist JSON")->required();
    c_render->add_option("--canvas", rd.canvas, "Canvas WxHxZ");
    c_render->add_option("--placement", rd.placement, "Placement JSON")->required();
    c_render->add_option("--out", rd.out, "SVG path")->required();

    ConvertArgs cv;
    auto *c_convert = app.add_subcommand("convert", "Convert GSRC bookshelf to canonical JSON");
    c_convert->add_option("--blocks", cv.blocks, ".blocks file")->required();
    c_convert->add_option("--nets", cv.nets, ".nets file")->required();
    c_convert->add_option("--canvas", cv.canvas, "Canvas WxHxZ used for scaling");
    c_convert->add_option("--name", cv.name, "Netlist name (default: blocks file stem)");
    c_convert->add_option("--out", cv.out, "Output JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        std::cerr << "fp3d: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*c_gen)
            return cmd_gen(gen, g);
        if (*c_stats)
            return cmd_stats(stats, g);
        if (*c_train)
            return cmd_train(tr, g);
        if (*c_place)
            return cmd_place(pl, g);
        if (*c_eval)
            return cmd_eval(ev, g);
        if (*c_bound)
            return cmd_bound_check(bc, g);
        if (*c_render)
            return cmd_render(rd, g);
        if (*c_convert)
            return cmd_convert(cv, g);
    } catch (const UsageError &e) {
        std::cerr << "fp3d: " << e.what() << "\n";
        return 1;
    } catch (const DataError &e) {
        std::cerr << "fp3d: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "fp3d: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
