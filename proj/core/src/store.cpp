#include "fp3d/pipeline.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <string>

#include "json.hpp"

namespace fp3d {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string fmt_double(double v)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

ordered_json triple(double a, double b, double c) { return ordered_json::array({a, b, c}); }

std::array<double, 3> read_triple(const ordered_json &j, const char *what, int line)
{
    if (!j.is_array() || j.size() != 3)
        throw std::runtime_error("trajectory line " + std::to_string(line) + ": '" + what + "' must be a 3-array");
    std::array<double, 3> out{};
    for (std::size_t i = 0; i < 3; ++i) {
        if (!j[i].is_number())
            throw std::runtime_error("trajectory line " + std::to_string(line) + ": '" + what + "' must be numeric");
        out[i] = j[i].get<double>();
    }
    return out;
}

} // namespace

void write_trajectories(std::ostream &os, std::span<const Trajectory> trajs)
{
    for (const auto &tr : trajs) {
        ordered_json header;
        header["netlist"] = tr.netlist;
        header["hash"] = tr.hash;
        header["seed"] = tr.seed;
        header["failed"] = tr.failed;
        header["totals"] = {{"wirelength", tr.totals.total_wirelength},
                            {"max_congestion", tr.totals.max_congestion},
                            {"max_heat", tr.totals.max_heat}};
        header["canvas"] = {tr.canvas.width, tr.canvas.height, tr.canvas.layers};
        header["steps"] = tr.steps.size();
        os << header.dump() << '\n';
        for (const auto &s : tr.steps) {
            ordered_json line;
            line["t"] = s.t;
            line["action"] = {s.action.x, s.action.y, s.action.z};
            line["reward"] = triple(s.reward.w, s.reward.c, s.reward.h);
            line["rtg"] = triple(s.rtg[0], s.rtg[1], s.rtg[2]);
            os << line.dump() << '\n';
        }
    }
}

std::vector<Trajectory> read_trajectories(std::istream &is)
{
    std::vector<Trajectory> out;
    std::string text;
    int line_no = 0;
    std::size_t expected_steps = 0;
    auto fail = [&](const std::string &msg) {
        throw std::runtime_error("trajectory line " + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(is, text)) {
        ++line_no;
        if (text.empty())
            continue;
        ordered_json j;
        try {
            j = ordered_json::parse(text);
        } catch (const nlohmann::json::parse_error &e) {
            fail(std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object())
            fail("expected an object");
        if (j.contains("netlist")) {
            if (!out.empty() && out.back().steps.size() != expected_steps)
                fail("previous episode has " + std::to_string(out.back().steps.size()) + " steps, header says " +
                     std::to_string(expected_steps));
            try {
                Trajectory tr;
                tr.netlist = j.at("netlist").get<std::string>();
                tr.hash = j.at("hash").get<std::string>();
                tr.seed = j.at("seed").get<std::uint64_t>();
                tr.failed = j.at("failed").get<bool>();
                const auto &totals = j.at("totals");
                tr.totals.total_wirelength = totals.at("wirelength").get<double>();
                tr.totals.max_congestion = totals.at("max_congestion").get<double>();
                tr.totals.max_heat = totals.at("max_heat").get<double>();
                if (j.contains("canvas")) {
                    const auto &c = j.at("canvas");
                    tr.canvas = {c.at(0).get<int>(), c.at(1).get<int>(), c.at(2).get<int>()};
                }
                expected_steps = j.contains("steps") ? j.at("steps").get<std::size_t>() : 0;
                out.push_back(std::move(tr));
            } catch (const nlohmann::json::exception &e) {
                fail(std::string("bad episode header: ") + e.what());
            }
        } else {
            if (out.empty())
                fail("step record before any episode header");
            StepRecord s;
            try {
                s.t = j.at("t").get<int>();
                const auto a = j.at("action");
                s.action = {a.at(0).get<int>(), a.at(1).get<int>(), a.at(2).get<int>()};
            } catch (const nlohmann::json::exception &e) {
                fail(std::string("bad step record: ") + e.what());
            }
            const auto r = read_triple(j.at("reward"), "reward", line_no);
            s.reward = {r[0], r[1], r[2]};
            s.rtg = read_triple(j.at("rtg"), "rtg", line_no);
            if (s.t != static_cast<int>(out.back().steps.size()))
                fail("step index " + std::to_string(s.t) + " out of sequence");
            out.back().steps.push_back(s);
        }
    }
    if (!out.empty() && out.back().steps.size() != expected_steps)
        fail("last episode has " + std::to_string(out.back().steps.size()) + " steps, header says " +
             std::to_string(expected_steps));
    return out;
}

void write_bound_csv(std::ostream &os, const BoundReport &report)
{
    os << "t,legal,gap,lipschitz,candidate_gap,proposal_gap,psi_k,critic_error,bound,holds,triangle,"
          "lipschitz_selftest\n";
    for (const auto &s : report.steps)
        os << s.t << ',' << s.legal_count << ',' << fmt_double(s.gap) << ',' << fmt_double(s.lipschitz) << ','
           << fmt_double(s.candidate_gap) << ',' << fmt_double(s.proposal_gap) << ',' << fmt_double(s.psi_k) << ','
           << fmt_double(s.critic_error) << ',' << fmt_double(s.bound) << ',' << int(s.holds) << ','
           << int(s.triangle) << ',' << int(s.lipschitz_selftest) << '\n';
}

void write_error_csv(std::ostream &os, const ErrorCurve &curve)
{
    os << "t,mse_w,mse_c,mse_h,var_w,var_c,var_h\n";
    for (std::size_t t = 0; t < curve.mean.size(); ++t) {
        os << t;
        for (int d = 0; d < 3; ++d)
            os << ',' << fmt_double(curve.mean[t][d]);
        for (int d = 0; d < 3; ++d)
            os << ',' << fmt_double(curve.variance[t][d]);
        os << '\n';
    }
}

} // namespace fp3d
