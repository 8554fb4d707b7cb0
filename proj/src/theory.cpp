#include "dsseg/theory.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "dsseg/rng.hpp"

namespace dsseg {

using nlohmann::json;

namespace {

// Welford accumulator.
struct RunningStats {
    long long n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void push(double x) {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }
    double standard_error() const {
        if (n < 2) return 0.0;
        return std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n));
    }
};

}  // namespace

void NoiseModelSpec::validate() const {
    if (dim < 1) throw ValidationError("NoiseModelSpec: dim must be >= 1");
    if (sigma.size() != 1 && sigma.size() != static_cast<std::size_t>(dim)) {
        throw ValidationError("NoiseModelSpec: sigma needs 1 or dim entries");
    }
    for (double s : sigma) {
        if (!(s >= 0.0)) throw ValidationError("NoiseModelSpec: sigma must be >= 0");
    }
    if (iterations < 1) throw ValidationError("NoiseModelSpec: iterations must be >= 1");
    if (trials < 1) throw ValidationError("NoiseModelSpec: trials must be >= 1");
    if (loss_process == LossProcess::constant && !(loss >= 0.0)) {
        throw ValidationError("NoiseModelSpec: loss must be >= 0");
    }
    if (loss_process == LossProcess::uniform && !(loss_lo >= 0.0 && loss_hi >= loss_lo)) {
        throw ValidationError("NoiseModelSpec: need 0 <= loss_lo <= loss_hi");
    }
    LAEMAConfig{w_max, lambda, EmaMode::la_ema}.validate();
}

double NoiseModelSpec::trace() const {
    double tr = 0.0;
    for (int i = 0; i < dim; ++i) tr += sigma_at(i) * sigma_at(i);
    return tr;
}

json to_json(const NoiseModelSpec& s) {
    json loss = s.loss_process == LossProcess::constant
                    ? json{{"type", "constant"}, {"value", s.loss}}
                    : json{{"type", "uniform"}, {"lo", s.loss_lo}, {"hi", s.loss_hi}};
    return {{"dim", s.dim},
            {"sigma", s.sigma},
            {"loss_process", loss},
            {"iterations", s.iterations},
            {"trials", s.trials},
            {"lambda", s.lambda},
            {"w_max", s.w_max},
            {"teacher", s.teacher == TeacherProcess::accumulate ? "accumulate" : "reset_to_optimum"},
            {"seed", s.seed}};
}

NoiseModelSpec noise_spec_from_json(const json& j) {
    NoiseModelSpec s;
    try {
        s.dim = j.value("dim", s.dim);
        if (j.contains("sigma")) {
            const auto& sg = j.at("sigma");
            s.sigma = sg.is_array() ? sg.get<std::vector<double>>() : std::vector<double>{sg.get<double>()};
        }
        if (j.contains("loss_process")) {
            const auto& lp = j.at("loss_process");
            const std::string type = lp.value("type", std::string("constant"));
            if (type == "constant") {
                s.loss_process = LossProcess::constant;
                s.loss = lp.value("value", s.loss);
            } else if (type == "uniform") {
                s.loss_process = LossProcess::uniform;
                s.loss_lo = lp.value("lo", s.loss_lo);
                s.loss_hi = lp.value("hi", s.loss_hi);
            } else {
                throw ValidationError("NoiseModelSpec: unknown loss_process '" + type + "'");
            }
        }
        s.iterations = j.value("iterations", j.value("T", s.iterations));
        s.trials = j.value("trials", s.trials);
        s.lambda = j.value("lambda", s.lambda);
        s.w_max = j.value("w_max", s.w_max);
        const std::string teacher = j.value("teacher", std::string("reset_to_optimum"));
        if (teacher == "accumulate") {
            s.teacher = TeacherProcess::accumulate;
        } else if (teacher != "reset_to_optimum") {
            throw ValidationError("NoiseModelSpec: unknown teacher process '" + teacher + "'");
        }
        s.seed = j.value("seed", s.seed);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("noise model spec: ") + e.what());
    }
    s.validate();
    return s;
}

DeviationSeries simulate_deviation(const NoiseModelSpec& spec, EmaMode mode) {
    spec.validate();
    const LAEMAConfig cfg{spec.w_max, spec.lambda, mode};
    const auto T = static_cast<std::size_t>(spec.iterations);
    const auto d = static_cast<std::size_t>(spec.dim);

    std::vector<RunningStats> stats(T);
    std::vector<double> sigma(d);
    for (std::size_t i = 0; i < d; ++i) sigma[i] = spec.sigma_at(static_cast<int>(i));
    // theta* = 0, so the teacher vector is its own deviation.
    std::vector<double> teacher(d);

    for (int trial = 0; trial < spec.trials; ++trial) {
        Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(trial)}));
        std::fill(teacher.begin(), teacher.end(), 0.0);
        for (std::size_t t = 0; t < T; ++t) {
            const double loss =
                spec.loss_process == LossProcess::constant ? spec.loss : rng.uniform(spec.loss_lo, spec.loss_hi);
            const double w = la_ema_weight(static_cast<long long>(t), loss, cfg);
            if (spec.teacher == TeacherProcess::reset_to_optimum) std::fill(teacher.begin(), teacher.end(), 0.0);
            double sq = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double student = sigma[i] * rng.normal();
                teacher[i] = (1.0 - w) * teacher[i] + w * student;
                sq += teacher[i] * teacher[i];
            }
            stats[t].push(sq);
        }
    }

    DeviationSeries out{spec, mode, {}, {}};
    for (const auto& s : stats) {
        out.mean.push_back(s.mean);
        out.se.push_back(s.standard_error());
    }
    return out;
}

SuppressionReport check_suppression(const DeviationSeries& standard, const DeviationSeries& loss_aware) {
    if (!(standard.spec == loss_aware.spec)) throw ValidationError("check_suppression: specs differ");
    if (standard.mode != EmaMode::standard_ema || loss_aware.mode != EmaMode::la_ema) {
        throw ValidationError("check_suppression: expected (standard_ema, la_ema) series");
    }
    if (standard.mean.size() != loss_aware.mean.size()) throw ValidationError("check_suppression: length mismatch");

    const auto& spec = standard.spec;
    const double min_loss = spec.loss_process == LossProcess::constant ? spec.loss : spec.loss_lo;
    SuppressionReport report;
    report.suppression_expected = spec.lambda > 0.0 && min_loss > 0.0 && spec.trace() > 0.0;

    for (std::size_t t = 0; t < standard.mean.size(); ++t) {
        SuppressionRow row;
        row.t = static_cast<long long>(t);
        row.mean_std = standard.mean[t];
        row.se_std = standard.se[t];
        row.mean_la = loss_aware.mean[t];
        row.se_la = loss_aware.se[t];
        if (row.mean_std > 0.0 && row.mean_la > 0.0) {
            row.ratio = row.mean_la / row.mean_std;
            row.ratio_se = row.ratio * std::hypot(row.se_la / row.mean_la, row.se_std / row.mean_std);
        } else if (row.mean_std == 0.0 && row.mean_la == 0.0) {
            row.ratio = 1.0;
        } else {
            row.ratio = row.mean_std > 0.0 ? row.mean_la / row.mean_std : std::numeric_limits<double>::infinity();
        }
        if (report.suppression_expected) {
            row.pass = row.mean_la + 3.0 * std::hypot(row.se_la, row.se_std) < row.mean_std;
        } else {
            row.pass = std::abs(row.ratio - 1.0) <= 3.0 * row.ratio_se;
        }
        report.all_pass = report.all_pass && row.pass;
        report.rows.push_back(row);
    }
    return report;
}

void write_suppression_csv(std::ostream& os, const SuppressionReport& report) {
    os << "t,mode,mean,se,ratio,pass\n" << std::setprecision(12);
    for (const auto& r : report.rows) {
        os << r.t << ",standard_ema," << r.mean_std << ',' << r.se_std << ',' << r.ratio << ',' << (r.pass ? 1 : 0)
           << '\n';
        os << r.t << ",la_ema," << r.mean_la << ',' << r.se_la << ',' << r.ratio << ',' << (r.pass ? 1 : 0) << '\n';
    }
}

}  // namespace dsseg
