#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "pime/harness/config.hpp"
#include "pime/harness/csv.hpp"
#include "pime/harness/episode.hpp"
#include "pime/harness/train.hpp"

namespace pime::harness {

struct SegmentMetrics {
    int model_id = 0;
    int segment = 0;
    double y_ref = 0.0;
    double segment_return = 0.0;
    double sse = 0.0;       // mean |error| over the final 25% of the segment
    double overshoot = 0.0; // max excursion past y_ref after the first crossing
    int settling_steps = 0; // first step after which |error| stays below tol
};

struct EvalReport {
    std::vector<double> levels;
    int segment_len = 0;
    double settle_tol = 0.3;
    std::vector<SegmentMetrics> rows;      // n_models x levels, model-major
    std::vector<double> episode_returns;   // whole-trace return per model
};

namespace detail {

inline SegmentMetrics segment_metrics(const std::vector<StepRow>& trace, int segment, int L,
                                      double y_ref, double y_start, double settle_tol,
                                      int model_id) {
    SegmentMetrics m;
    m.model_id = model_id;
    m.segment = segment;
    m.y_ref = y_ref;
    const int begin = segment * L;
    const int window = (L + 3) / 4;

    const double dir = (y_ref > y_start) ? 1.0 : (y_ref < y_start ? -1.0 : 0.0);
    bool crossed = dir == 0.0;
    int settled_from = L;
    for (int k = 0; k < L; ++k) {
        const StepRow& row = trace[begin + k];
        const double err = row.y - y_ref;
        m.segment_return += row.reward;
        if (k >= L - window) m.sse += std::abs(err);
        if (!crossed && err * dir >= 0.0) crossed = true;
        if (crossed) m.overshoot = std::max(m.overshoot, err * dir);
        if (std::abs(err) <= settle_tol) {
            if (settled_from == L) settled_from = k;
        } else {
            settled_from = L;
        }
    }
    m.sse /= window;
    m.overshoot = std::max(m.overshoot, 0.0);
    m.settling_steps = settled_from;
    return m;
}

} // namespace detail

/// Deterministic evaluation of a controller on `n_models` ensemble draws
/// over the piecewise-constant eval_levels trace. Each model gets its own
/// substream keyed by (seed, kEval, index): model draw, then initial state.
/// When out_dir is non-empty, per-model trajectory CSVs are written there.
inline EvalReport evaluate(const Agent& agent_in, const ExperimentConfig& config, int n_models,
                           const envsim::SetpointSpec& trace_spec,
                           const std::string& out_dir = "") {
    if (n_models < 1) throw std::invalid_argument("evaluate: n_models must be >= 1");
    envsim::validate(trace_spec);
    if (trace_spec.eval_levels.empty())
        throw std::invalid_argument("evaluate: trace needs at least one level");

    Agent agent = agent_in;
    agent.deterministic = true;

    const int L = trace_spec.segment_len;
    std::vector<double> schedule;
    schedule.reserve(trace_spec.eval_levels.size() * static_cast<std::size_t>(L));
    for (double lvl : trace_spec.eval_levels)
        schedule.insert(schedule.end(), static_cast<std::size_t>(L), lvl);

    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    EvalReport report;
    report.levels = trace_spec.eval_levels;
    report.segment_len = L;
    report.settle_tol = config.settle_tol;

    Rng root(config.seed);
    for (int i = 0; i < n_models; ++i) {
        Rng er = root.substream({stream::kEval, static_cast<std::uint64_t>(i)});
        envsim::PlantModel model = envsim::sample_model(config.ensemble, er);
        model.model_id = i;
        apply_sim_options(model, config);

        const EpisodeResult ep = run_schedule(model, agent, schedule, config, std::move(er));
        report.episode_returns.push_back(ep.return_sum);

        double y_start = ep.y_initial;
        for (std::size_t s = 0; s < trace_spec.eval_levels.size(); ++s) {
            report.rows.push_back(detail::segment_metrics(ep.trace, static_cast<int>(s), L,
                                                          trace_spec.eval_levels[s], y_start,
                                                          config.settle_tol, i));
            y_start = ep.trace[(s + 1) * static_cast<std::size_t>(L) - 1].y;
        }
        if (!out_dir.empty()) {
            char name[48];
            std::snprintf(name, sizeof name, "traj_model_%04d.csv", i);
            std::ofstream os = open_csv(out_dir + "/" + name);
            write_trajectory_header(os);
            write_trajectory_rows(os, ep.trace, i, config.seed);
            if (!os) throw IoError("failed writing trajectory CSV in " + out_dir);
        }
    }
    return report;
}

/// Evaluate on one explicit model instead of ensemble draws.
inline EvalReport evaluate_on_model(const Agent& agent_in, const ExperimentConfig& config,
                                    const envsim::PlantModel& model,
                                    const envsim::SetpointSpec& trace_spec,
                                    Rng rng) {
    envsim::validate(trace_spec);
    Agent agent = agent_in;
    agent.deterministic = true;
    const int L = trace_spec.segment_len;
    std::vector<double> schedule;
    for (double lvl : trace_spec.eval_levels)
        schedule.insert(schedule.end(), static_cast<std::size_t>(L), lvl);

    EvalReport report;
    report.levels = trace_spec.eval_levels;
    report.segment_len = L;
    report.settle_tol = config.settle_tol;
    const EpisodeResult ep = run_schedule(model, agent, schedule, config, std::move(rng));
    report.episode_returns.push_back(ep.return_sum);
    double y_start = ep.y_initial;
    for (std::size_t s = 0; s < trace_spec.eval_levels.size(); ++s) {
        report.rows.push_back(detail::segment_metrics(ep.trace, static_cast<int>(s), L,
                                                      trace_spec.eval_levels[s], y_start,
                                                      config.settle_tol, model.model_id));
        y_start = ep.trace[(s + 1) * static_cast<std::size_t>(L) - 1].y;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report files and comparison tables
// ---------------------------------------------------------------------------

inline void save_report(const EvalReport& r, const std::string& path) {
    std::ofstream os = open_csv(path);
    os << "# pime eval report v1\n";
    os << "# segment_len = " << r.segment_len << "\n";
    os << "# settle_tol = " << fmt9(r.settle_tol) << "\n";
    os << "# levels = ";
    for (std::size_t i = 0; i < r.levels.size(); ++i) os << (i ? ", " : "") << fmt9(r.levels[i]);
    os << "\n";
    os << "model_id,segment,y_ref,segment_return,sse,overshoot,settling_steps\n";
    for (const auto& m : r.rows)
        os << m.model_id << ',' << m.segment << ',' << fmt9(m.y_ref) << ','
           << fmt9(m.segment_return) << ',' << fmt9(m.sse) << ',' << fmt9(m.overshoot) << ','
           << m.settling_steps << "\n";
    if (!os) throw IoError("failed writing report: " + path);
}

inline EvalReport load_report(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open report: " + path);
    EvalReport r;
    std::string line;
    bool header_seen = false;
    std::map<int, double> model_returns;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = harness::detail::trim(line.substr(1, eq - 1));
            const std::string val = harness::detail::trim(line.substr(eq + 1));
            if (key == "segment_len") r.segment_len = std::stoi(val);
            else if (key == "settle_tol") r.settle_tol = std::stod(val);
            else if (key == "levels") r.levels = harness::detail::parse_numbers(key, val);
            continue;
        }
        if (!header_seen) { // column header
            header_seen = true;
            continue;
        }
        SegmentMetrics m;
        std::istringstream ls(line);
        std::string field;
        auto next = [&](const char* what) {
            if (!std::getline(ls, field, ','))
                throw StructuralError("report " + path + ": missing field " + what);
            return field;
        };
        m.model_id = std::stoi(next("model_id"));
        m.segment = std::stoi(next("segment"));
        m.y_ref = std::stod(next("y_ref"));
        m.segment_return = std::stod(next("segment_return"));
        m.sse = std::stod(next("sse"));
        m.overshoot = std::stod(next("overshoot"));
        m.settling_steps = std::stoi(next("settling_steps"));
        r.rows.push_back(m);
        model_returns[m.model_id] += m.segment_return;
    }
    for (const auto& [id, ret] : model_returns) {
        (void)id;
        r.episode_returns.push_back(ret);
    }
    return r;
}

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t n = 0;
};

inline Aggregate aggregate(const std::vector<double>& v) {
    Aggregate a;
    a.n = v.size();
    if (v.empty()) return a;
    for (double x : v) a.mean += x;
    a.mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(ss / static_cast<double>(v.size()));
    return a;
}

/// Aligned per-segment comparison across labelled reports (several reports
/// may share a label, e.g. one per training seed); mean and std are taken
/// over all (model, report) rows of that label. All reports must share the
/// same trace.
inline void compare(const std::vector<std::pair<std::string, EvalReport>>& reports,
                    std::ostream& os) {
    if (reports.empty()) throw StructuralError("compare: no reports");
    const EvalReport& ref = reports.front().second;
    for (const auto& [label, r] : reports) {
        (void)label;
        if (r.levels != ref.levels || r.segment_len != ref.segment_len)
            throw StructuralError("compare: reports do not share the same trace");
    }
    // stable label order: first appearance
    std::vector<std::string> labels;
    for (const auto& [label, r] : reports) {
        (void)r;
        bool seen = false;
        for (const auto& l : labels) seen = seen || l == label;
        if (!seen) labels.push_back(label);
    }

    os << "segment,y_ref";
    for (const auto& l : labels)
        os << ',' << l << "_return_mean," << l << "_return_std," << l << "_sse_mean," << l
           << "_sse_std," << l << "_overshoot_mean," << l << "_overshoot_std," << l
           << "_settling_mean," << l << "_settling_std";
    os << "\n";

    const int n_seg = static_cast<int>(ref.levels.size());
    for (int s = 0; s <= n_seg; ++s) {
        const bool overall = s == n_seg;
        os << (overall ? std::string("all") : std::to_string(s)) << ','
           << (overall ? std::string("") : fmt9(ref.levels[s]));
        for (const auto& l : labels) {
            std::vector<double> ret, sse, ovs, settle;
            for (const auto& [label, r] : reports) {
                if (label != l) continue;
                for (const auto& m : r.rows) {
                    if (!overall && m.segment != s) continue;
                    ret.push_back(m.segment_return);
                    sse.push_back(m.sse);
                    ovs.push_back(m.overshoot);
                    settle.push_back(m.settling_steps);
                }
            }
            for (const auto& agg : {aggregate(ret), aggregate(sse), aggregate(ovs), aggregate(settle)})
                os << ',' << fmt9(agg.mean) << ',' << fmt9(agg.stddev);
        }
        os << "\n";
    }
}

} // namespace pime::harness
