#include "icbandit/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "icbandit/numeric.hpp"
#include "icbandit/parallel.hpp"
#include "icbandit/regret.hpp"
#include "icbandit/rng.hpp"

namespace icbandit {

namespace {

using nlohmann::json;

// Substreams of the master seed.
constexpr std::uint64_t kEnsembleStream = 1;
constexpr std::uint64_t kReplicationStream = 2;
constexpr std::uint64_t kOracleStream = 3;
constexpr std::uint64_t kAdaptiveStream = 4;

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (const auto& p : parts) out += (out.empty() ? "" : ", ") + p;
    return out;
}

// Collects schema problems across the whole document.
struct Diagnostics {
    std::vector<std::string> unknown;
    std::vector<std::string> invalid;  // "path: reason"
    std::vector<std::string> invalid_keys;

    void fail(const std::string& path, const std::string& reason) {
        invalid.push_back(path + ": " + reason);
        invalid_keys.push_back(path);
    }
};

bool is_count(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Typed view of one JSON object that remembers which keys were read.
class Section {
public:
    Section(const json& j, std::string path, Diagnostics& diag) : j_(j), path_(std::move(path)), diag_(diag) {}

    std::string key_path(const std::string& key) const {
        if (key.empty()) return path_;
        return path_.empty() ? key : path_ + "." + key;
    }

    bool has(const std::string& key) {
        used_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    std::optional<std::size_t> count(const std::string& key, std::size_t min = 0) {
        if (!has(key)) return std::nullopt;
        const auto& v = j_.at(key);
        if (!is_count(v)) {
            diag_.fail(key_path(key), "expected a non-negative integer");
            return std::nullopt;
        }
        const auto x = v.get<std::size_t>();
        if (x < min) {
            diag_.fail(key_path(key), "must be at least " + std::to_string(min));
            return std::nullopt;
        }
        return x;
    }

    std::optional<std::uint64_t> seed(const std::string& key) {
        if (!has(key)) return std::nullopt;
        const auto& v = j_.at(key);
        if (!is_count(v)) {
            diag_.fail(key_path(key), "expected a non-negative integer");
            return std::nullopt;
        }
        return v.get<std::uint64_t>();
    }

    std::optional<double> real(const std::string& key, double lo = -std::numeric_limits<double>::infinity(),
                               double hi = std::numeric_limits<double>::infinity()) {
        if (!has(key)) return std::nullopt;
        const auto& v = j_.at(key);
        if (!v.is_number()) {
            diag_.fail(key_path(key), "expected a number");
            return std::nullopt;
        }
        const double x = v.get<double>();
        if (!(x >= lo && x <= hi)) {
            diag_.fail(key_path(key), "must lie in [" + format_real(lo) + ", " + format_real(hi) + "]");
            return std::nullopt;
        }
        return x;
    }

    std::optional<std::string> text(const std::string& key, std::initializer_list<const char*> choices = {}) {
        if (!has(key)) return std::nullopt;
        const auto& v = j_.at(key);
        if (!v.is_string()) {
            diag_.fail(key_path(key), "expected a string");
            return std::nullopt;
        }
        auto s = v.get<std::string>();
        if (choices.size() > 0 &&
            std::none_of(choices.begin(), choices.end(), [&](const char* c) { return s == c; })) {
            std::vector<std::string> names(choices.begin(), choices.end());
            diag_.fail(key_path(key), "must be one of " + join(names));
            return std::nullopt;
        }
        return s;
    }

    std::optional<bool> flag(const std::string& key) {
        if (!has(key)) return std::nullopt;
        if (!j_.at(key).is_boolean()) {
            diag_.fail(key_path(key), "expected true or false");
            return std::nullopt;
        }
        return j_.at(key).get<bool>();
    }

    std::optional<std::vector<double>> reals(const std::string& key, double lo = -std::numeric_limits<double>::infinity(),
                                             double hi = std::numeric_limits<double>::infinity()) {
        if (!has(key)) return std::nullopt;
        const auto& v = j_.at(key);
        if (!v.is_array() || v.empty()) {
            diag_.fail(key_path(key), "expected a non-empty array of numbers");
            return std::nullopt;
        }
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number() || !(x.get<double>() >= lo && x.get<double>() <= hi)) {
                diag_.fail(key_path(key), "entries must be numbers in [" + format_real(lo) + ", " + format_real(hi) + "]");
                return std::nullopt;
            }
            out.push_back(x.get<double>());
        }
        return out;
    }

    std::optional<std::vector<std::size_t>> counts(const std::string& key, std::size_t min = 1) {
        if (!has(key)) return std::nullopt;
        const auto& v = j_.at(key);
        if (!v.is_array() || v.empty()) {
            diag_.fail(key_path(key), "expected a non-empty array of integers");
            return std::nullopt;
        }
        std::vector<std::size_t> out;
        for (const auto& x : v) {
            if (!is_count(x) || x.get<std::size_t>() < min) {
                diag_.fail(key_path(key), "entries must be integers >= " + std::to_string(min));
                return std::nullopt;
            }
            out.push_back(x.get<std::size_t>());
        }
        return out;
    }

    std::optional<std::vector<std::vector<double>>> matrix(const std::string& key) {
        if (!has(key)) return std::nullopt;
        const auto& v = j_.at(key);
        bool ok = v.is_array() && !v.empty();
        std::vector<std::vector<double>> out;
        if (ok)
            for (const auto& row : v) {
                if (!row.is_array() || row.empty()) {
                    ok = false;
                    break;
                }
                std::vector<double> r;
                for (const auto& x : row) {
                    if (!x.is_number() || !(x.get<double>() >= 0.0 && x.get<double>() <= 1.0)) {
                        ok = false;
                        break;
                    }
                    r.push_back(x.get<double>());
                }
                out.push_back(std::move(r));
            }
        if (!ok) {
            diag_.fail(key_path(key), "expected a non-empty array of mean vectors in [0, 1]");
            return std::nullopt;
        }
        return out;
    }

    std::optional<Section> object(const std::string& key) {
        if (!has(key)) return std::nullopt;
        if (!j_.at(key).is_object()) {
            diag_.fail(key_path(key), "expected an object");
            return std::nullopt;
        }
        return Section(j_.at(key), key_path(key), diag_);
    }

    void require(const std::string& key) {
        if (!j_.contains(key) || j_.at(key).is_null()) diag_.fail(key_path(key), "required");
    }

    // Records every key that was never read.
    void finish() const {
        for (const auto& [key, _] : j_.items())
            if (!used_.count(key)) diag_.unknown.push_back(key_path(key));
    }

    Diagnostics& diagnostics() { return diag_; }

private:
    const json& j_;
    std::string path_;
    Diagnostics& diag_;
    std::set<std::string> used_;
};

NoiseFamily parse_noise_key(Section& s) {
    const auto text = s.text("noise");
    if (!text) return NoiseFamily::bernoulli();
    try {
        return parse_noise(*text);
    } catch (const std::exception& e) {
        s.diagnostics().fail(s.key_path("noise"), e.what());
        return NoiseFamily::bernoulli();
    }
}

EnsembleSpec parse_ensemble(Section s) {
    EnsembleSpec e;
    s.require("kind");
    e.kind = s.text("kind", {"leaders", "finite", "drifting", "piecewise", "manifest"}).value_or("leaders");
    e.noise = parse_noise_key(s);
    if (e.kind == "leaders") {
        e.high = s.real("high", 0.0, 1.0).value_or(0.8);
        e.low = s.real("low", 0.0, 1.0).value_or(0.4);
        e.rho = s.real("rho", 0.0, 1.0).value_or(0.0);
    } else if (e.kind == "finite") {
        s.require("means");
        e.means = s.matrix("means").value_or(std::vector<std::vector<double>>{});
        e.weights = s.reals("weights", 0.0, 1.0).value_or(std::vector<double>{});
        if (!e.weights.empty() && e.weights.size() != e.means.size())
            s.diagnostics().fail(s.key_path("weights"), "needs one weight per instance");
    } else if (e.kind == "drifting") {
        s.require("rho");
        e.rho = s.real("rho", 0.0, 1.0).value_or(0.0);
    } else if (e.kind == "piecewise") {
        s.require("segments");
        e.segments = s.matrix("segments").value_or(std::vector<std::vector<double>>{});
    } else if (e.kind == "manifest") {
        s.require("path");
        e.path = s.text("path").value_or("");
    }
    s.finish();
    return e;
}

BeliefSpec parse_belief(Section s) {
    BeliefSpec b;
    b.kind = s.text("kind", {"uniform", "point", "pmf"}).value_or("uniform");
    if (b.kind == "uniform") {
        b.start = s.count("start", 1).value_or(1);
        b.length = s.count("length", 1);
        b.components = s.count("components", 1);
    } else if (b.kind == "point") {
        s.require("round");
        b.round = s.count("round", 1).value_or(1);
    } else {
        s.require("pmf");
        b.pmf = s.reals("pmf", 0.0).value_or(std::vector<double>{});
    }
    s.finish();
    return b;
}

std::optional<PolicyConfig> parse_policy(Section s, std::optional<std::size_t> arms, const json& raw) {
    static const char* allowed[] = {"kind", "K", "L", "eta", "gamma", "beta", "seed"};
    json j = raw;
    for (const char* key : allowed) s.has(key);
    s.finish();
    if (!j.contains("K") && arms) j["K"] = *arms;
    for (const auto& [key, _] : raw.items())
        if (std::find_if(std::begin(allowed), std::end(allowed), [&](const char* a) { return key == a; }) ==
            std::end(allowed))
            j.erase(key);
    try {
        return policy_config_from_json(j);
    } catch (const std::exception& e) {
        s.diagnostics().fail(s.key_path(""), e.what());
        return std::nullopt;
    }
}

// A number or the string "verify".
std::optional<double> verifiable(Section& s, const std::string& key, double lo, double hi) {
    if (s.has(key) && s.raw(key).is_string()) {
        s.text(key, {"verify"});
        return std::nullopt;
    }
    return s.real(key, lo, hi);
}

AssumptionSpec parse_assumptions(Section s) {
    AssumptionSpec a;
    s.require("Delta");
    a.Delta = s.real("Delta", std::numeric_limits<double>::min(), 1.0).value_or(1.0);
    a.alpha = verifiable(s, "alpha", std::numeric_limits<double>::min(), 1.0);
    a.rho = verifiable(s, "rho", 0.0, 1.0);
    s.finish();
    return a;
}

BoundsSpec parse_bounds(Section s, std::optional<std::size_t> arms) {
    BoundsSpec b;
    b.chart = s.flag("chart").value_or(true);
    if (auto p = s.object("point")) {
        BoundInputs in;
        p->require("alpha");
        p->require("Delta");
        p->require("regret");
        in.alpha = p->real("alpha", std::numeric_limits<double>::min(), 1.0).value_or(1.0);
        in.Delta = p->real("Delta", std::numeric_limits<double>::min(), 1.0).value_or(1.0);
        in.rho = p->real("rho", 0.0).value_or(0.0);
        in.regret = p->real("regret", 0.0).value_or(0.0);
        in.regret_kind = p->text("kind", {"external", "swap"}).value_or("external") == "swap" ? RegretKind::swap
                                                                                             : RegretKind::external;
        in.psi_max = p->real("psi_max", 0.0).value_or(0.0);
        in.phi = p->real("phi", 0.0).value_or(0.0);
        in.w2 = p->real("w2", 0.0, 1.0).value_or(1.0);
        in.arms = p->count("K", 1).value_or(arms.value_or(2));
        if (auto beta = p->real("beta", 0.0)) in.beta = beta;
        if (auto delta = p->real("delta", std::numeric_limits<double>::min(), 1.0)) in.delta = delta;
        p->finish();
        b.point = in;
    } else {
        s.require("T");
        s.require("L");
    }
    b.horizons = s.counts("T").value_or(std::vector<std::size_t>{});
    b.windows = s.counts("L").value_or(std::vector<std::size_t>{});
    b.rho = s.reals("rho", 0.0, 1.0).value_or(std::vector<double>{});
    b.rho_per_window = s.reals("rho_per_window", 0.0).value_or(std::vector<double>{});
    if (b.rho.empty() && b.rho_per_window.empty()) b.rho = {0.0};
    b.alpha = s.real("alpha", std::numeric_limits<double>::min(), 1.0).value_or(1.0);
    b.Delta = s.real("Delta", std::numeric_limits<double>::min(), 1.0).value_or(1.0);
    b.arms = s.count("K", 1);
    if (!b.arms) b.arms = arms;
    b.regret_constant = s.real("regret_constant", 0.0).value_or(1.0);
    b.rate = s.text("rate", {"horizon", "window"}).value_or("horizon") == "window" ? WindowRegretRate::window_tuned
                                                                                 : WindowRegretRate::horizon_tuned;
    if (!b.point && !b.arms) s.diagnostics().fail(s.key_path("K"), "required (here or at the top level)");
    s.finish();
    return b;
}

AdaptiveSpec parse_adaptive(Section s) {
    AdaptiveSpec a;
    a.lengths = s.counts("lengths").value_or(std::vector<std::size_t>{});
    a.min_length = s.count("min", 1).value_or(0);
    a.max_length = s.count("max", 1).value_or(0);
    a.count = s.count("count", 2).value_or(12);
    a.seeds = s.count("seeds", 1).value_or(50);
    a.basis = s.text("basis", {"pseudo", "realized"}).value_or("pseudo") == "realized" ? IntervalRegretBasis::realized
                                                                                      : IntervalRegretBasis::pseudo;
    a.baseline = s.text("baseline", {"exp3", "exp4s", "swap-wrapper", "none"}).value_or("exp3");
    a.chart = s.flag("chart").value_or(true);
    s.finish();
    return a;
}

template <typename... Args>
std::string printf_string(const char* f, Args... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    return os;
}

void write_json(const std::filesystem::path& path, const json& j) {
    auto os = open_output(path);
    os << j.dump(2) << '\n';
}

void prepare_out(const ExperimentConfig& config) { std::filesystem::create_directories(config.out); }

void require_keys(const ExperimentConfig& c, const std::string& command, bool horizon, bool ensemble, bool policy,
                  bool beliefs, bool assumptions) {
    std::vector<std::string> missing;
    if (horizon && c.horizon == 0) missing.push_back("T");
    if (horizon && c.arms == 0) missing.push_back("K");
    if (ensemble && !c.ensemble) missing.push_back("ensemble");
    if (policy && !c.policy) missing.push_back("policy");
    if (beliefs && c.beliefs.empty()) missing.push_back("beliefs");
    if (assumptions && !c.assumptions) missing.push_back("assumptions");
    if (!missing.empty()) throw ConfigError(command + ": missing required keys: " + join(missing), missing);
}

json belief_to_json(const BeliefSpec& b) {
    json j{{"kind", b.kind}};
    if (b.kind == "uniform") {
        j["start"] = b.start;
        if (b.length) j["length"] = *b.length;
        if (b.components) j["components"] = *b.components;
    } else if (b.kind == "point") {
        j["round"] = b.round;
    } else {
        j["pmf"] = b.pmf;
    }
    return j;
}

json dispersion_json(const TemporalBelief& b) {
    return {{"psi_max", b.psi_max()}, {"phi", b.phi()}, {"w2", b.w2()}};
}

json summary_json(const SampleSummary& s) {
    return {{"mean", s.mean}, {"ci95", s.ci95}, {"stddev", s.stddev}, {"n", s.n}};
}

}  // namespace

ConfigError::ConfigError(const std::string& message, std::vector<std::string> keys)
    : std::runtime_error(message), keys_(std::move(keys)) {}

std::string format_real(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

ExperimentConfig parse_experiment_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    Diagnostics diag;
    Section s(j, "", diag);
    ExperimentConfig c;
    c.scenario = s.text("scenario").value_or("unnamed");
    c.horizon = s.count("T", 1).value_or(0);
    c.arms = s.count("K", 1).value_or(0);
    c.seed = s.seed("seed").value_or(0);
    c.out = s.text("out").value_or("results");
    if (auto e = s.object("ensemble")) c.ensemble = parse_ensemble(*e);
    if (s.has("beliefs")) {
        const auto& arr = s.raw("beliefs");
        if (!arr.is_array() || arr.empty()) {
            diag.fail("beliefs", "expected a non-empty array of belief objects");
        } else {
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const auto path = "beliefs[" + std::to_string(i) + "]";
                if (!arr[i].is_object())
                    diag.fail(path, "expected an object");
                else
                    c.beliefs.push_back(parse_belief(Section(arr[i], path, diag)));
            }
        }
    }
    if (auto p = s.object("policy"))
        c.policy = parse_policy(*p, c.arms ? std::optional<std::size_t>(c.arms) : std::nullopt, s.raw("policy"));
    if (auto a = s.object("assumptions")) c.assumptions = parse_assumptions(*a);
    if (s.has("regret") && s.raw("regret").is_string())
        s.text("regret", {"measured"});
    else
        c.regret = s.real("regret", 0.0);
    c.delta = s.real("delta", std::numeric_limits<double>::min(), 1.0);
    c.method = s.text("method", {"rao-blackwell", "sampled-round"}).value_or("rao-blackwell") == "sampled-round"
                   ? GainMethod::sampled_round
                   : GainMethod::rao_blackwell;
    if (auto r = s.object("replications")) {
        c.replications.runs = r->count("runs", 1).value_or(c.replications.runs);
        c.replications.outer = r->count("outer", 1).value_or(c.replications.outer);
        c.replications.inner = r->count("inner", 1).value_or(c.replications.inner);
        c.replications.min_count = r->count("min_count", 1).value_or(c.replications.min_count);
        r->finish();
    }
    if (auto b = s.object("bounds"))
        c.bounds = parse_bounds(*b, c.arms ? std::optional<std::size_t>(c.arms) : std::nullopt);
    if (auto a = s.object("adaptive")) c.adaptive = parse_adaptive(*a);
    if (auto o = s.object("oracle")) {
        c.oracle.transcripts = o->count("transcripts", 1).value_or(c.oracle.transcripts);
        c.oracle.max_horizon = o->count("max_T", 1).value_or(c.oracle.max_horizon);
        c.oracle.max_arms = o->count("max_K", 1).value_or(c.oracle.max_arms);
        if (c.oracle.max_arms > 6) diag.fail("oracle.max_K", "the brute-force oracle supports at most 6 actions");
        o->finish();
    }
    s.finish();

    if (c.policy && c.arms && c.policy->arms != c.arms) diag.fail("policy.K", "must equal the top-level K");
    if (c.horizon)
        for (std::size_t i = 0; i < c.beliefs.size(); ++i) {
            const auto& b = c.beliefs[i];
            const auto path = "beliefs[" + std::to_string(i) + "]";
            if (b.kind == "uniform" && b.start + b.length.value_or(c.horizon - std::min(c.horizon, b.start - 1)) - 1 >
                                           c.horizon)
                diag.fail(path, "window runs past round T");
            if (b.kind == "uniform" && b.start > c.horizon) diag.fail(path + ".start", "exceeds T");
            if (b.kind == "point" && b.round > c.horizon) diag.fail(path + ".round", "exceeds T");
            if (b.kind == "pmf" && b.pmf.size() != c.horizon) diag.fail(path + ".pmf", "must list T entries");
            if (b.components && (b.start != 1 || b.length.value_or(c.horizon) != c.horizon))
                diag.fail(path + ".components", "only a window covering all T rounds can be decomposed");
            if (b.components && *b.components > c.horizon) diag.fail(path + ".components", "exceeds T");
        }

    if (!diag.unknown.empty()) {
        std::vector<std::string> keys = diag.unknown;
        keys.insert(keys.end(), diag.invalid_keys.begin(), diag.invalid_keys.end());
        std::string msg = "unknown keys: " + join(diag.unknown);
        if (!diag.invalid.empty()) msg += "; invalid: " + join(diag.invalid);
        throw ConfigError(msg, keys);
    }
    if (!diag.invalid.empty()) throw ConfigError("invalid: " + join(diag.invalid), diag.invalid_keys);
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_experiment_config(j);
}

RewardEnsemble build_ensemble(const ExperimentConfig& config) {
    if (!config.ensemble) throw ConfigError("missing required key: ensemble", {"ensemble"});
    const auto& e = *config.ensemble;
    const auto T = config.horizon, K = config.arms;
    auto check_width = [&](const std::vector<std::vector<double>>& rows, const char* key) {
        for (const auto& r : rows)
            if (r.size() != K) throw ConfigError(std::string("ensemble.") + key + ": every row needs K entries",
                                                 {std::string("ensemble.") + key});
    };
    if (e.kind == "leaders") {
        if (K < 2) throw ConfigError("ensemble: leaders need K >= 2", {"K"});
        Rng rng(derive_seed(config.seed, kEnsembleStream));
        std::vector<RewardInstance> support;
        for (std::size_t best = 0; best < K; ++best) {
            std::vector<double> m(K, e.low);
            m[best] = e.high;
            support.push_back(e.rho > 0.0 ? random_walk_instance(m, T, e.rho, rng, e.noise)
                                          : RewardInstance::stationary(T, m, e.noise));
        }
        return RewardEnsemble::finite(std::move(support), std::vector<double>(K, 1.0 / static_cast<double>(K)));
    }
    if (e.kind == "finite") {
        check_width(e.means, "means");
        std::vector<RewardInstance> support;
        for (const auto& m : e.means) support.push_back(RewardInstance::stationary(T, m, e.noise));
        auto w = e.weights.empty() ? std::vector<double>(e.means.size(), 1.0 / static_cast<double>(e.means.size()))
                                   : e.weights;
        try {
            return RewardEnsemble::finite(std::move(support), std::move(w));
        } catch (const std::invalid_argument& err) {
            throw ConfigError(std::string("ensemble.weights: ") + err.what(), {"ensemble.weights"});
        }
    }
    if (e.kind == "drifting") return make_drifting_ensemble(T, K, e.rho, derive_seed(config.seed, kEnsembleStream), e.noise);
    if (e.kind == "piecewise") {
        check_width(e.segments, "segments");
        if (e.segments.size() > T) throw ConfigError("ensemble.segments: more segments than rounds", {"ensemble.segments"});
        return RewardEnsemble::finite({piecewise_stationary(T, e.segments, e.noise)}, {1.0});
    }
    auto prior = read_ensemble_manifest(e.path);
    if (prior.horizon() != T || prior.arms() != K)
        throw ConfigError("ensemble.path: manifest does not match T and K", {"ensemble.path"});
    return prior;
}

TemporalBelief build_belief(const BeliefSpec& spec, std::size_t horizon) {
    if (spec.kind == "uniform") return uniform_window(spec.start, spec.length.value_or(horizon - spec.start + 1), horizon);
    if (spec.kind == "point") return point_mass(spec.round, horizon);
    return TemporalBelief::from_pmf(spec.pmf);
}

CommandResult cmd_regret(const ExperimentConfig& c, std::size_t jobs) {
    require_keys(c, "regret", true, true, true, true, false);
    const auto prior = build_ensemble(c);
    std::vector<TemporalBelief> beliefs;
    for (const auto& b : c.beliefs) beliefs.push_back(build_belief(b, c.horizon));
    const auto factory = make_policy_factory(*c.policy, c.horizon);
    const bool with_oracle = c.arms <= 4;
    const std::size_t runs = c.replications.runs, nb = beliefs.size();

    // values[(r * nb + i) * cols + col]
    const std::size_t cols = with_oracle ? 5 : 4;
    std::vector<double> values(runs * nb * cols);
    parallel_for(runs, jobs, [&](std::size_t r) {
        Rng rng(derive_seed(c.seed, kReplicationStream, r));
        const auto mu = prior.sample(rng);
        const auto tr = run_compliant(factory, mu, derive_seed(c.seed, kReplicationStream, r, 1));
        for (std::size_t i = 0; i < nb; ++i) {
            double* row = &values[(r * nb + i) * cols];
            row[0] = weighted_external_regret(tr, beliefs[i]);
            row[1] = weighted_swap_regret(tr, beliefs[i]);
            row[2] = weighted_pseudo_regret(tr, beliefs[i], mu);
            row[3] = weighted_pseudo_swap_regret(tr, beliefs[i], mu);
            if (with_oracle) row[4] = weighted_swap_regret_oracle(tr, beliefs[i]);
        }
    });

    prepare_out(c);
    CommandResult result;
    const auto csv_path = c.out / "regret.csv";
    {
        auto os = open_output(csv_path);
        os << "replication,belief,external,swap,pseudo_external,pseudo_swap" << (with_oracle ? ",swap_oracle" : "")
           << '\n';
        for (std::size_t r = 0; r < runs; ++r)
            for (std::size_t i = 0; i < nb; ++i) {
                os << r + 1 << ',' << i + 1;
                for (std::size_t k = 0; k < cols; ++k) os << ',' << format_real(values[(r * nb + i) * cols + k]);
                os << '\n';
            }
    }

    static const char* names[] = {"external", "swap", "pseudo_external", "pseudo_swap", "swap_oracle"};
    json summary{{"scenario", c.scenario}, {"seed", c.seed}, {"T", c.horizon}, {"K", c.arms},
                 {"replications", runs}, {"policy", to_json(*c.policy)}};
    double oracle_gap = 0.0;
    std::ostringstream text;
    text << "belief  external (mean +- ci)          swap (mean +- ci)\n";
    for (std::size_t i = 0; i < nb; ++i) {
        json entry{{"belief", i + 1}, {"spec", belief_to_json(c.beliefs[i])}, {"dispersion", dispersion_json(beliefs[i])}};
        std::vector<SampleSummary> sums;
        for (std::size_t k = 0; k < cols; ++k) {
            std::vector<double> column(runs);
            for (std::size_t r = 0; r < runs; ++r) column[r] = values[(r * nb + i) * cols + k];
            sums.push_back(summarize(column));
            entry[names[k]] = summary_json(sums.back());
        }
        if (with_oracle)
            for (std::size_t r = 0; r < runs; ++r)
                oracle_gap = std::max(oracle_gap, std::fabs(values[(r * nb + i) * cols + 1] - values[(r * nb + i) * cols + 4]));
        summary["beliefs"].push_back(entry);
        text << printf_string("%6zu  %.6f +- %.6f          %.6f +- %.6f\n", i + 1, sums[0].mean, sums[0].ci95,
                              sums[1].mean, sums[1].ci95);
    }
    if (with_oracle) {
        summary["oracle_max_abs_diff"] = oracle_gap;
        text << "oracle swap column max |diff| = " << format_real(oracle_gap) << '\n';
        if (oracle_gap > 1e-9) result.exit_code = 1;
    }
    const auto json_path = c.out / "regret_summary.json";
    write_json(json_path, summary);
    result.summary = text.str();
    result.files = {csv_path, json_path};
    return result;
}

CommandResult cmd_ic_check(const ExperimentConfig& c, std::size_t jobs) {
    require_keys(c, "ic-check", true, true, true, true, true);
    const auto prior = build_ensemble(c);
    const auto& assume = *c.assumptions;
    const bool swap_policy = c.policy->kind == "swap-wrapper";

    // Agent beliefs first, then the blocks of any decomposed agent.
    std::vector<TemporalBelief> beliefs;
    for (const auto& b : c.beliefs) beliefs.push_back(build_belief(b, c.horizon));
    std::vector<std::pair<std::size_t, std::size_t>> block_range(c.beliefs.size(), {0, 0});
    for (std::size_t i = 0; i < c.beliefs.size(); ++i) {
        if (!c.beliefs[i].components) continue;
        auto parts = decompose_uniform(c.horizon, *c.beliefs[i].components);
        block_range[i] = {beliefs.size(), beliefs.size() + parts.blocks.size()};
        for (auto& blk : parts.blocks) beliefs.push_back(std::move(blk));
    }

    GainEstimateOptions opt;
    opt.n_outer = c.replications.outer;
    opt.n_inner = c.replications.inner;
    opt.seed = derive_seed(c.seed, kReplicationStream);
    opt.min_count = c.replications.min_count;
    opt.jobs = jobs;
    opt.method = c.method;
    const auto reports = estimate_conditional_gain(make_policy_factory(*c.policy, c.horizon), prior, beliefs, opt);

    const double rho = assume.rho ? *assume.rho : verify_drift(prior).rho_hat;
    auto bound_for = [&](std::size_t k, json& record) {
        BoundInputs in;
        in.alpha = assume.alpha ? *assume.alpha : verify_explorability(prior, beliefs[k], assume.Delta).alpha_hat;
        in.Delta = assume.Delta;
        in.rho = rho;
        in.arms = c.arms;
        in.delta = c.delta;
        in.regret_kind = swap_policy ? RegretKind::swap : RegretKind::external;
        const double measured =
            swap_policy ? reports[k].swap_regret_worst_instance : reports[k].external_regret_worst_instance;
        in.regret = c.regret ? *c.regret : std::max(0.0, measured);
        in.with_belief(beliefs[k]);
        BoundReport rep;
        if (!(in.alpha > 0.0)) {
            rep.epsilon = 1.0;
            rep.epsilon_clamped = true;
        } else {
            rep = swap_policy ? epsilon_swap(in) : epsilon_external(in);
        }
        record["inputs"] = in;
        record["bound"] = rep;
        return rep;
    };

    prepare_out(c);
    CommandResult result;
    json doc{{"scenario", c.scenario}, {"seed", c.seed}, {"T", c.horizon}, {"K", c.arms},
             {"policy", to_json(*c.policy)}, {"rho", rho}};
    std::ostringstream text;
    text << "belief  epsilon     max gain    pass  fail  inconclusive  no-guarantee\n";
    for (std::size_t i = 0; i < c.beliefs.size(); ++i) {
        json record{{"belief", i + 1}, {"spec", belief_to_json(c.beliefs[i])}};
        double epsilon = bound_for(i, record).epsilon;
        record["epsilon_direct"] = epsilon;
        if (c.beliefs[i].components) {
            std::vector<BoundReport> comps;
            json blocks = json::array();
            for (std::size_t k = block_range[i].first; k < block_range[i].second; ++k) {
                json blk;
                comps.push_back(bound_for(k, blk));
                blocks.push_back(std::move(blk));
            }
            const double eps_mix = mixture_epsilon(comps);
            record["components"] = blocks;
            record["epsilon_mixture"] = eps_mix;
            epsilon = std::min(epsilon, eps_mix);
        }
        record["epsilon"] = epsilon;
        const auto rows = ic_check(reports[i], epsilon);
        record["gains"] = to_json(reports[i]);
        record["rows"] = to_json(rows);
        doc["agents"].push_back(record);

        const auto csv_path = c.out / ("ic_check_" + std::to_string(i + 1) + ".csv");
        {
            auto os = open_output(csv_path);
            write_ic_check_csv(os, rows);
        }
        result.files.push_back(csv_path);

        std::size_t tally[4] = {0, 0, 0, 0};
        for (const auto& r : rows) ++tally[static_cast<int>(r.status)];
        if (tally[static_cast<int>(CheckStatus::fail)] > 0) result.exit_code = 1;
        text << printf_string("%6zu  %-10.6f  %-10.6f  %4zu  %4zu  %12zu  %12zu\n", i + 1, epsilon,
                              reports[i].max_defined_gain(), tally[0], tally[1], tally[2], tally[3]);
    }
    const auto json_path = c.out / "ic_check.json";
    write_json(json_path, doc);
    result.files.push_back(json_path);
    result.summary = text.str();
    return result;
}

CommandResult cmd_bounds(const ExperimentConfig& c) {
    if (!c.bounds) throw ConfigError("bounds: missing required key: bounds", {"bounds"});
    const auto& b = *c.bounds;
    prepare_out(c);
    CommandResult result;
    const auto json_path = c.out / "bounds.json";
    if (b.point) {
        const auto rep = b.point->regret_kind == RegretKind::swap ? epsilon_swap(*b.point) : epsilon_external(*b.point);
        write_json(json_path, {{"inputs", *b.point}, {"bound", rep}});
        result.summary = "epsilon = " + format_real(rep.epsilon) + "\n";
        result.files = {json_path};
        return result;
    }
    for (std::size_t T : b.horizons)
        if (std::none_of(b.windows.begin(), b.windows.end(), [T](std::size_t L) { return L <= T; }))
            throw ConfigError("bounds.L: no window fits horizon " + std::to_string(T), {"bounds.L"});

    struct Drift {
        double value;
        bool per_window;
    };
    std::vector<Drift> drifts;
    for (double r : b.rho) drifts.push_back({r, false});
    for (double r : b.rho_per_window) drifts.push_back({r, true});

    json sweep = json::array();
    std::vector<ChartSeries> series;
    const auto csv_path = c.out / "bounds.csv";
    auto os = open_output(csv_path);
    os << "T,L,rho,regret,delta_tilde,c_term,eta_psi,eta_phi,epsilon,prob_lower_psi,prob_lower_phi\n";
    std::ostringstream text;
    for (std::size_t T : b.horizons)
        for (const auto& d : drifts) {
            ChartSeries s;
            s.label = printf_string(d.per_window ? "T=%zu, rho=%g/L" : "T=%zu, rho=%g", T, d.value);
            double best = 1.0;
            for (std::size_t L : b.windows) {
                if (L > T) continue;
                const double rho = d.per_window ? d.value / static_cast<double>(L) : d.value;
                const auto rep = uniform_window_epsilon(T, L, *b.arms, b.alpha, b.Delta, rho, b.regret_constant, b.rate);
                os << T << ',' << L << ',' << format_real(rho) << ',' << format_real(rep.effective_regret) << ','
                   << format_real(rep.delta_tilde) << ',' << format_real(rep.c_term) << ',' << format_real(rep.eta_psi)
                   << ',' << format_real(rep.eta_phi) << ',' << format_real(rep.epsilon) << ','
                   << format_real(rep.prob_lower_bound_psi) << ',' << format_real(rep.prob_lower_bound_phi) << '\n';
                sweep.push_back({{"T", T}, {"L", L}, {"rho", rho}, {"bound", rep}});
                s.x.push_back(static_cast<double>(L));
                s.y.push_back(rep.epsilon);
                best = std::min(best, rep.epsilon);
            }
            text << s.label << ": smallest epsilon " << format_real(best) << '\n';
            series.push_back(std::move(s));
        }
    os.close();
    write_json(json_path, {{"scenario", c.scenario},
                           {"alpha", b.alpha},
                           {"Delta", b.Delta},
                           {"K", *b.arms},
                           {"regret_constant", b.regret_constant},
                           {"rate", b.rate == WindowRegretRate::window_tuned ? "window" : "horizon"},
                           {"sweep", sweep}});
    result.files = {csv_path, json_path};
    if (b.chart) {
        const auto svg = c.out / "bounds.svg";
        write_svg_chart(svg, "epsilon frontier", "window length L", "epsilon", series, true, false);
        result.files.push_back(svg);
    }
    result.summary = text.str();
    return result;
}

CommandResult cmd_adaptive(const ExperimentConfig& c, std::size_t jobs) {
    require_keys(c, "adaptive", true, true, true, false, false);
    const AdaptiveSpec spec = c.adaptive.value_or(AdaptiveSpec{});
    const auto prior = build_ensemble(c);
    if (prior.kind() == RewardEnsemble::Kind::finite && prior.support().size() != 1)
        throw ConfigError("adaptive: the ensemble must describe a single adversary", {"ensemble"});
    const auto adversary =
        prior.kind() == RewardEnsemble::Kind::finite ? prior.support().front() : prior.draw(0);

    auto lengths = spec.lengths;
    if (lengths.empty()) {
        const auto lo = spec.min_length ? spec.min_length
                                        : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(c.horizon))));
        const auto hi = spec.max_length ? spec.max_length : c.horizon;
        if (lo > hi) throw ConfigError("adaptive: min exceeds max", {"adaptive.min", "adaptive.max"});
        lengths = log_spaced_lengths(lo, hi, spec.count);
    }
    if (std::any_of(lengths.begin(), lengths.end(), [&](std::size_t l) { return l > c.horizon; }))
        throw ConfigError("adaptive: interval lengths exceed T", {"adaptive.lengths"});

    const auto seed = derive_seed(c.seed, kAdaptiveStream);
    const auto main_profile = adaptive_regret_profile(make_policy_factory(*c.policy, c.horizon), adversary, lengths,
                                                      spec.seeds, seed, spec.basis, jobs);
    std::optional<AdaptiveProfile> base;
    if (spec.baseline != "none") {
        PolicyConfig pc;
        pc.kind = spec.baseline;
        pc.arms = c.arms;
        base = adaptive_regret_profile(make_policy_factory(pc, c.horizon), adversary, lengths, spec.seeds, seed,
                                       spec.basis, jobs);
    }

    prepare_out(c);
    CommandResult result;
    const auto csv_path = c.out / "adaptive.csv";
    {
        auto os = open_output(csv_path);
        os << "length,policy_mean,policy_ci" << (base ? ",baseline_mean,baseline_ci" : "") << '\n';
        for (std::size_t i = 0; i < lengths.size(); ++i) {
            os << lengths[i] << ',' << format_real(main_profile.max_interval_regret[i]) << ','
               << format_real(main_profile.max_interval_ci[i]);
            if (base) os << ',' << format_real(base->max_interval_regret[i]) << ',' << format_real(base->max_interval_ci[i]);
            os << '\n';
        }
    }
    auto profile_json = [](const std::string& kind, const AdaptiveProfile& p) {
        json anchored = json::array();
        for (const auto& row : p.anchored) {
            json r = json::array();
            for (double v : row) r.push_back(std::isnan(v) ? json(nullptr) : json(v));
            anchored.push_back(r);
        }
        json slopes = json::array();
        for (double v : p.anchored_slopes) slopes.push_back(std::isnan(v) ? json(nullptr) : json(v));
        return json{{"policy", kind},
                    {"slope", std::isnan(p.slope) ? json(nullptr) : json(p.slope)},
                    {"max_interval_regret", p.max_interval_regret},
                    {"max_interval_ci", p.max_interval_ci},
                    {"anchors", p.anchors},
                    {"anchored", anchored},
                    {"anchored_slopes", slopes}};
    };
    json doc{{"scenario", c.scenario},
             {"seed", c.seed},
             {"T", c.horizon},
             {"K", c.arms},
             {"seeds", spec.seeds},
             {"basis", spec.basis == IntervalRegretBasis::pseudo ? "pseudo" : "realized"},
             {"lengths", lengths},
             {"policy", profile_json(c.policy->kind, main_profile)}};
    if (base) doc["baseline"] = profile_json(spec.baseline, *base);
    const auto json_path = c.out / "adaptive.json";
    write_json(json_path, doc);
    result.files = {csv_path, json_path};

    std::ostringstream text;
    text << c.policy->kind << " slope " << format_real(main_profile.slope) << '\n';
    if (base) {
        double steepest = -std::numeric_limits<double>::infinity();
        for (double s : base->anchored_slopes)
            if (!std::isnan(s)) steepest = std::max(steepest, s);
        text << spec.baseline << " slope " << format_real(base->slope) << ", steepest anchored slope "
             << format_real(steepest) << '\n';
    }
    result.summary = text.str();

    if (spec.chart) {
        std::vector<ChartSeries> series;
        std::vector<double> x(lengths.begin(), lengths.end());
        series.push_back({c.policy->kind, x, main_profile.max_interval_regret});
        if (base) series.push_back({spec.baseline, x, base->max_interval_regret});
        const auto svg = c.out / "adaptive.svg";
        write_svg_chart(svg, "max interval regret", "interval length", "regret", series, true, true);
        result.files.push_back(svg);
    }
    return result;
}

CommandResult cmd_oracle_check(const ExperimentConfig& c, std::size_t jobs) {
    const auto& o = c.oracle;
    struct Case {
        std::size_t T = 0, K = 0;
        double fast = 0.0, oracle = 0.0;
    };
    std::vector<Case> cases(o.transcripts);
    parallel_for(o.transcripts, jobs, [&](std::size_t i) {
        Rng rng(derive_seed(c.seed, kOracleStream, i));
        Case& cs = cases[i];
        cs.T = 1 + rng.next_u64() % o.max_horizon;
        cs.K = 1 + rng.next_u64() % o.max_arms;
        Transcript tr(cs.K, cs.T);
        std::vector<double> u(cs.K);
        for (std::size_t t = 0; t < cs.T; ++t) {
            for (auto& x : u) x = rng.uniform();
            const auto a = rng.next_u64() % cs.K;
            tr.append(a, a, u);
        }
        // Sparse random weights: each round is dropped with probability 1/2.
        std::vector<double> w(cs.T);
        double total = 0.0;
        for (auto& x : w) {
            x = rng.bernoulli(0.5) ? rng.uniform() : 0.0;
            total += x;
        }
        if (total == 0.0) w[rng.next_u64() % cs.T] = 1.0, total = 1.0;
        for (auto& x : w) x /= total;
        const auto D = TemporalBelief::from_pmf(std::move(w));
        cs.fast = weighted_swap_regret(tr, D);
        cs.oracle = weighted_swap_regret_oracle(tr, D);
    });

    prepare_out(c);
    CommandResult result;
    const auto csv_path = c.out / "oracle_check.csv";
    double worst = 0.0;
    {
        auto os = open_output(csv_path);
        os << "case,T,K,fast,oracle,abs_diff\n";
        for (std::size_t i = 0; i < cases.size(); ++i) {
            const auto& cs = cases[i];
            const double diff = std::fabs(cs.fast - cs.oracle);
            worst = std::max(worst, diff);
            os << i + 1 << ',' << cs.T << ',' << cs.K << ',' << format_real(cs.fast) << ',' << format_real(cs.oracle)
               << ',' << format_real(diff) << '\n';
        }
    }
    result.exit_code = worst <= 1e-12 ? 0 : 1;
    result.summary = printf_string("%zu transcripts, max |fast - oracle| = %.3g (%s)\n", cases.size(), worst,
                                   result.exit_code == 0 ? "pass" : "fail");
    result.files = {csv_path};
    return result;
}

namespace {

std::string escape_xml(const std::string& s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

}  // namespace

void write_svg_chart(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<ChartSeries>& series, bool log_x, bool log_y) {
    constexpr double W = 760, H = 460, left = 70, right = 190, top = 40, bottom = 55;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!log_x || x > 0) && (!log_y || y > 0);
    };
    auto tx = [&](double x) { return log_x ? std::log10(x) : x; };
    auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
            if (usable(s.x[i], s.y[i])) {
                x0 = std::min(x0, tx(s.x[i]));
                x1 = std::max(x1, tx(s.x[i]));
                y0 = std::min(y0, ty(s.y[i]));
                y1 = std::max(y1, ty(s.y[i]));
            }
    if (!(x0 <= x1)) x0 = 0, x1 = 1;
    if (!(y0 <= y1)) y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double pw = W - left - right, ph = H - top - bottom;
    auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return top + ph - (v - y0) / (y1 - y0) * ph; };

    auto os = open_output(path);
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape_xml(title)
       << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double vx = x0 + (x1 - x0) * k / 4.0, vy = y0 + (y1 - y0) * k / 4.0;
        const double lx = log_x ? std::pow(10.0, vx) : vx, ly = log_y ? std::pow(10.0, vy) : vy;
        os << "<line x1=\"" << px(vx) << "\" y1=\"" << top << "\" x2=\"" << px(vx) << "\" y2=\"" << top + ph
           << "\" stroke=\"#ddd\"/>\n";
        os << "<line x1=\"" << left << "\" y1=\"" << py(vy) << "\" x2=\"" << left + pw << "\" y2=\"" << py(vy)
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << px(vx) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
           << printf_string("%.4g", lx) << "</text>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << py(vy) + 4 << "\" text-anchor=\"end\">"
           << printf_string("%.4g", ly) << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << escape_xml(x_label)
       << (log_x ? " (log)" : "") << "</text>\n";
    os << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape_xml(y_label) << (log_y ? " (log)" : "") << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* colour = palette[k % std::size(palette)];
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
            if (usable(s.x[i], s.y[i])) os << px(tx(s.x[i])) << ',' << py(ty(s.y[i])) << ' ';
        os << "\"/>\n";
        const double ly = top + 14 + 18.0 * static_cast<double>(k);
        os << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw + 32 << "\" y2=\""
           << ly - 4 << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly << "\">" << escape_xml(s.label) << "</text>\n";
    }
    os << "</svg>\n";
}

}  // namespace icbandit
