#include "calm/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "calm/error.hpp"

namespace calm {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) noexcept {
    const auto is_space = [](char c) { return c == ' ' || c == '\t'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_number(std::string_view field) {
    field = trim(field);
    if (field.empty()) return std::nullopt;
    double value = 0.0;
    const auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || end != field.data() + field.size()) return std::nullopt;
    return value;
}

bool is_count(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Strict reader for one JSON object: every key must be consumed before finish().
class ObjectReader {
public:
    ObjectReader(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        if (!doc_.is_object()) throw InputError(path_ + " must be an object");
    }

    bool has(const std::string& key) const { return doc_.contains(key) && !doc_.at(key).is_null(); }

    const json& at(const std::string& key) {
        seen_.insert(key);
        if (!doc_.contains(key)) throw InputError(where(key) + " is required");
        return doc_.at(key);
    }

    std::string where(const std::string& key) const { return path_ + "." + key; }

    std::string string(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_string()) throw InputError(where(key) + " must be a string");
        return v.get<std::string>();
    }

    double number(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_number()) throw InputError(where(key) + " must be a number");
        return v.get<double>();
    }

    std::uint64_t count(const std::string& key) {
        const auto& v = at(key);
        if (!is_count(v)) throw InputError(where(key) + " must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    void skip(const std::string& key) { seen_.insert(key); }

    void finish() const {
        for (const auto& item : doc_.items()) {
            if (!seen_.count(item.key())) throw InputError("unknown key " + where(item.key()));
        }
    }

private:
    const json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

Eigen::VectorXd scalar_or_vector(const json& v, std::size_t d, const std::string& where) {
    const auto di = static_cast<Eigen::Index>(d);
    if (v.is_number()) return Eigen::VectorXd::Constant(di, v.get<double>());
    if (!v.is_array()) throw InputError(where + " must be a number or an array");
    if (v.size() != d) throw InputError(where + " must have length d = " + std::to_string(d));
    Eigen::VectorXd out(di);
    for (std::size_t i = 0; i < d; ++i) {
        if (!v[i].is_number()) throw InputError(where + " entries must be numbers");
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
}

Eigen::MatrixXd matrix(const json& v, std::size_t d, const std::string& where) {
    const auto di = static_cast<Eigen::Index>(d);
    if (!v.is_array() || v.size() != d) throw InputError(where + " must be a d x d array");
    Eigen::MatrixXd out(di, di);
    for (std::size_t i = 0; i < d; ++i) {
        if (!v[i].is_array() || v[i].size() != d) throw InputError(where + " must be a d x d array");
        for (std::size_t j = 0; j < d; ++j) {
            if (!v[i][j].is_number()) throw InputError(where + " entries must be numbers");
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i][j].get<double>();
        }
    }
    return out;
}

json vector_json(const Eigen::VectorXd& v) {
    if (v.size() > 0 && (v.array() == v[0]).all()) return v[0];
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

// Covariance as x_sd when that form reproduces it exactly, else as x_cov.
void covariance_json(const Eigen::MatrixXd& sigma, json& out) {
    if (sigma.isDiagonal(0.0)) {
        const Eigen::VectorXd sd = sigma.diagonal().cwiseSqrt();
        if ((sd.array().square() == sigma.diagonal().array()).all()) {
            out["x_sd"] = vector_json(sd);
            return;
        }
    }
    json rows = json::array();
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < sigma.cols(); ++j) row.push_back(sigma(i, j));
        rows.push_back(std::move(row));
    }
    out["x_cov"] = std::move(rows);
}

struct CommonGenerator {
    std::size_t d = 0;
    Eigen::VectorXd beta;
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
    std::size_t n_train = 0;
    std::size_t n_val = 0;
    std::size_t n_rest = 0;
};

CommonGenerator read_common(ObjectReader& r) {
    CommonGenerator g;
    g.d = r.count("d");
    g.beta = scalar_or_vector(r.at("beta_true"), g.d, r.where("beta_true"));
    g.mu = scalar_or_vector(r.at("mu_x"), g.d, r.where("mu_x"));
    const bool has_sd = r.has("x_sd");
    const bool has_cov = r.has("x_cov");
    r.skip("x_sd");
    r.skip("x_cov");
    if (has_sd == has_cov) throw InputError(r.where("x_sd") + ": give exactly one of x_sd and x_cov");
    if (has_sd) {
        const Eigen::VectorXd sd = scalar_or_vector(r.at("x_sd"), g.d, r.where("x_sd"));
        if ((sd.array() <= 0.0).any()) throw InputError(r.where("x_sd") + " must be positive");
        g.sigma = sd.array().square().matrix().asDiagonal();
    } else {
        g.sigma = matrix(r.at("x_cov"), g.d, r.where("x_cov"));
    }
    g.n_train = r.count("n_train");
    g.n_val = r.count("n_val_test");
    g.n_rest = r.count("n_remaining_test");
    return g;
}

SyntheticTask read_generator(const json& doc, ExperimentKind kind) {
    ObjectReader r(doc, "generator");
    const auto g = read_common(r);
    if (kind == ExperimentKind::linear) {
        GaussianLinearConfig c;
        c.d = g.d;
        c.beta_true = g.beta;
        c.mu_x = g.mu;
        c.sigma_x = g.sigma;
        c.noise_mean = r.number("noise_mean");
        c.noise_var = r.number("noise_var");
        c.n_train = g.n_train;
        c.n_val_test = g.n_val;
        c.n_remaining_test = g.n_rest;
        r.finish();
        c.validate();
        return c;
    }
    LogisticConfig c;
    c.d = g.d;
    c.beta_true = g.beta;
    c.mu_x = g.mu;
    c.sigma_x = g.sigma;
    c.n_train = g.n_train;
    c.n_val_test = g.n_val;
    c.n_remaining_test = g.n_rest;
    r.finish();
    c.validate();
    return c;
}

std::vector<std::size_t> index_list(const json& v, const std::string& where) {
    if (!v.is_array()) throw InputError(where + " must be an array");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
        if (!is_count(e)) throw InputError(where + " entries must be non-negative integers");
        out.push_back(e.get<std::size_t>());
    }
    return out;
}

PipelineSpec read_pipeline(const json& doc, std::size_t index, std::size_t d) {
    const std::string path = "pipelines[" + std::to_string(index) + "]";
    ObjectReader r(doc, path);
    PipelineSpec p;
    p.id = r.string("id");
    if (p.id.empty()) throw InputError(r.where("id") + " must not be empty");
    const auto kind = parse_model_kind(r.string("model"));
    if (!kind) throw InputError(r.where("model") + " must be ols, logistic or external");
    p.model_kind = *kind;

    if (r.has("features") && r.has("drop_features")) {
        throw InputError(path + ": give at most one of features and drop_features");
    }
    if (r.has("features")) {
        p.feature_indices = index_list(r.at("features"), r.where("features"));
    } else if (r.has("drop_features")) {
        const auto drop = index_list(r.at("drop_features"), r.where("drop_features"));
        std::vector<std::size_t> keep;
        for (std::size_t j = 0; j < d; ++j) {
            if (std::find(drop.begin(), drop.end(), j) == drop.end()) keep.push_back(j);
        }
        for (auto j : drop) {
            if (j >= d) throw InputError(r.where("drop_features") + ": index " + std::to_string(j) + " >= d");
        }
        p.feature_indices = std::move(keep);
    }
    r.skip("features");
    r.skip("drop_features");
    if (p.feature_indices) {
        std::set<std::size_t> unique;
        for (auto j : *p.feature_indices) {
            if (j >= d) throw InputError(path + ": feature index " + std::to_string(j) + " >= d");
            if (!unique.insert(j).second) throw InputError(path + ": duplicate feature index " + std::to_string(j));
        }
    }

    if (r.has("files")) {
        const auto& files = r.at("files");
        if (!files.is_array()) throw InputError(r.where("files") + " must be an array of paths");
        for (const auto& f : files) {
            if (!f.is_string()) throw InputError(r.where("files") + " must be an array of paths");
            p.files.push_back(f.get<std::string>());
        }
    }
    r.skip("files");
    r.finish();

    if (p.model_kind == ModelKind::external && p.files.empty()) {
        throw InputError(path + ": external pipelines need files");
    }
    if (p.model_kind != ModelKind::external && !p.files.empty()) {
        throw InputError(path + ": only external pipelines take files");
    }
    return p;
}

std::size_t generator_dimension(const SyntheticTask& task) {
    return std::visit([](const auto& c) { return c.d; }, task);
}

json generator_json(const SyntheticTask& task) {
    return std::visit(
        [](const auto& c) {
            json g;
            g["d"] = c.d;
            g["beta_true"] = vector_json(c.beta_true);
            g["mu_x"] = vector_json(c.mu_x);
            covariance_json(c.sigma_x, g);
            if constexpr (std::is_same_v<std::decay_t<decltype(c)>, GaussianLinearConfig>) {
                g["noise_mean"] = c.noise_mean;
                g["noise_var"] = c.noise_var;
            }
            g["n_train"] = c.n_train;
            g["n_val_test"] = c.n_val_test;
            g["n_remaining_test"] = c.n_remaining_test;
            return g;
        },
        task);
}

std::optional<RiskSampling> parse_sampling(std::string_view name) {
    if (name == "sufficient_statistics") return RiskSampling::sufficient_statistics;
    if (name == "explicit_rows") return RiskSampling::explicit_rows;
    return std::nullopt;
}

std::string_view to_string(RiskSampling sampling) {
    return sampling == RiskSampling::sufficient_statistics ? "sufficient_statistics" : "explicit_rows";
}

std::string_view to_string(VanillaScope scope) {
    return scope == VanillaScope::full_test ? "full_test" : "remaining_test";
}

MetricKind metric_from(const json& v, const std::string& where) {
    if (!v.is_string()) throw InputError(where + " must be a metric name");
    const auto m = parse_metric(v.get<std::string>());
    if (!m) throw InputError(where + ": unknown metric '" + v.get<std::string>() + "'");
    return *m;
}

// Report-side readers. Reports are machine-written, so these only guard
// against truncated or hand-edited documents.
template <class T>
T field(const json& doc, const char* key) {
    if (!doc.contains(key)) throw InputError(std::string("report is missing '") + key + "'");
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw InputError(std::string("report field '") + key + "': " + e.what());
    }
}

MetricKind report_metric(const json& doc) {
    return metric_from(doc.at("metric"), "metric");
}

}  // namespace

PredictionSet parse_predictions(std::istream& in, Mode mode, const std::string& source) {
    std::vector<LabeledPrediction> items;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line(raw);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        line = trim(line);
        if (line.empty()) throw ParseError(source, line_no, "blank line");
        if (line_no == 1 && line == "prediction,label") continue;

        const auto comma = line.find(',');
        if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
            throw ParseError(source, line_no, "expected two comma-separated fields");
        }
        const auto p = parse_number(line.substr(0, comma));
        const auto y = parse_number(line.substr(comma + 1));
        if (!p) throw ParseError(source, line_no, "prediction is not a number");
        if (!y) throw ParseError(source, line_no, "label is not a number");
        if (!std::isfinite(*p) || !std::isfinite(*y)) throw ParseError(source, line_no, "non-finite value");
        if (mode == Mode::classification) {
            if (*p < 0.0 || *p > 1.0) throw ParseError(source, line_no, "prediction outside [0, 1]");
            if (*y != 0.0 && *y != 1.0) throw ParseError(source, line_no, "label must be 0 or 1");
        }
        items.push_back({*p, *y});
    }
    if (in.bad()) throw InputError(source + ": read error");
    if (items.empty()) throw InputError(source + ": no prediction records");
    return PredictionSet(std::move(items), mode);
}

PredictionSet read_prediction_file(const std::filesystem::path& path, Mode mode) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return parse_predictions(in, mode, path.string());
}

void write_prediction_file(const std::filesystem::path& path, const PredictionSet& data) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out.precision(17);
    out << "prediction,label\n";
    for (const auto& item : data.items()) out << item.prediction << ',' << item.label << '\n';
    if (!out) throw InputError("write failed: " + path.string());
}

std::string_view to_string(ExperimentKind kind) noexcept {
    return kind == ExperimentKind::linear ? "linear" : "logistic";
}

std::pair<const PipelineSpec&, const PipelineSpec&> RunConfig::ordered_pipelines() const {
    if (pipelines.size() != 2) throw InputError("config must declare two pipelines");
    if (pipelines[0].id == better) return {pipelines[0], pipelines[1]};
    return {pipelines[1], pipelines[0]};
}

ComparisonOptions RunConfig::comparison_options() const {
    ComparisonOptions options;
    options.test_set = test_set;
    options.metric.epsilon = epsilon;
    options.metric.vanilla_scope = vanilla_scope;
    options.val_fraction = val_fraction;
    return options;
}

RunConfig run_config_from_json(const json& doc) {
    ObjectReader r(doc, "config");
    RunConfig c;
    if (r.has("description")) c.description = r.string("description");
    r.skip("description");

    const auto kind = r.string("experiment");
    if (kind == "linear") {
        c.experiment = ExperimentKind::linear;
    } else if (kind == "logistic") {
        c.experiment = ExperimentKind::logistic;
    } else {
        throw InputError("config.experiment must be linear or logistic");
    }
    c.generator = read_generator(r.at("generator"), c.experiment);
    const auto d = generator_dimension(c.generator);

    if (r.has("pipelines")) {
        const auto& list = r.at("pipelines");
        if (!list.is_array() || list.size() != 2) throw InputError("config.pipelines must list two pipelines");
        for (std::size_t i = 0; i < list.size(); ++i) c.pipelines.push_back(read_pipeline(list[i], i, d));
        if (c.pipelines[0].id == c.pipelines[1].id) throw InputError("config.pipelines ids must differ");
        const ModelKind native = c.experiment == ExperimentKind::linear ? ModelKind::ols : ModelKind::logistic;
        for (const auto& p : c.pipelines) {
            if (p.model_kind != native && p.model_kind != ModelKind::external) {
                throw InputError("pipeline '" + p.id + "': model " + std::string(to_string(p.model_kind)) +
                                 " does not fit a " + std::string(to_string(c.experiment)) + " experiment");
            }
        }
        c.better = r.string("better");
        if (c.better != c.pipelines[0].id && c.better != c.pipelines[1].id) {
            throw InputError("config.better must name one of the pipelines");
        }
    }
    r.skip("pipelines");
    if (c.pipelines.empty() && r.has("better")) throw InputError("config.better needs pipelines");
    r.skip("better");

    if (r.has("rounds")) c.rounds = r.count("rounds");
    if (r.has("runs")) c.runs = r.count("runs");
    if (r.has("master_seed")) c.master_seed = r.count("master_seed");
    for (const char* k : {"rounds", "runs", "master_seed"}) r.skip(k);
    if (c.rounds < 1) throw InputError("config.rounds must be at least 1");
    if (c.runs < 1) throw InputError("config.runs must be at least 1");

    if (r.has("metrics")) {
        const auto& list = r.at("metrics");
        if (!list.is_array() || list.empty()) throw InputError("config.metrics must be a non-empty array");
        for (std::size_t i = 0; i < list.size(); ++i) {
            c.metrics.push_back(metric_from(list[i], "config.metrics[" + std::to_string(i) + "]"));
        }
    } else if (c.experiment == ExperimentKind::linear) {
        c.metrics = {MetricKind::quadratic_loss, MetricKind::calibrated_quadratic_loss};
    } else {
        c.metrics = {MetricKind::log_loss, MetricKind::calibrated_log_loss};
    }
    r.skip("metrics");
    for (auto m : c.metrics) {
        if (requires_classification(m) && c.experiment != ExperimentKind::logistic) {
            throw InputError(std::string(to_string(m)) + " needs a logistic experiment");
        }
        if (std::count(c.metrics.begin(), c.metrics.end(), m) > 1) {
            throw InputError("config.metrics lists " + std::string(to_string(m)) + " twice");
        }
    }

    if (r.has("val_fraction")) {
        c.val_fraction = r.number("val_fraction");
        if (!(*c.val_fraction > 0.0 && *c.val_fraction < 1.0)) {
            throw InputError("config.val_fraction must lie in (0, 1)");
        }
    }
    r.skip("val_fraction");

    if (r.has("test_set")) {
        const auto policy = parse_test_set_policy(r.string("test_set"));
        if (!policy) {
            throw InputError("config.test_set must be shared_across_rounds, shared_per_round or fresh_per_replicate");
        }
        c.test_set = *policy;
    }
    r.skip("test_set");

    if (r.has("vanilla_scope")) {
        const auto scope = r.string("vanilla_scope");
        if (scope == "full_test") {
            c.vanilla_scope = VanillaScope::full_test;
        } else if (scope == "remaining_test") {
            c.vanilla_scope = VanillaScope::remaining_test;
        } else {
            throw InputError("config.vanilla_scope must be full_test or remaining_test");
        }
    }
    r.skip("vanilla_scope");

    if (r.has("epsilon")) {
        c.epsilon = r.number("epsilon");
        if (!(c.epsilon > 0.0 && c.epsilon < 0.5)) throw InputError("config.epsilon must lie in (0, 0.5)");
    }
    r.skip("epsilon");

    if (r.has("histogram_bins")) c.histogram_bins = r.count("histogram_bins");
    r.skip("histogram_bins");
    if (c.histogram_bins < 1) throw InputError("config.histogram_bins must be at least 1");

    if (r.has("theory")) {
        ObjectReader t(r.at("theory"), "config.theory");
        if (t.has("replications")) c.theory.replications = t.count("replications");
        if (t.has("test_draw")) c.theory.options.test_draw = t.count("test_draw");
        if (t.has("calibration_draw")) c.theory.options.calibration_draw = t.count("calibration_draw");
        if (t.has("variance_floor")) c.theory.options.variance_floor = t.number("variance_floor");
        if (t.has("sampling")) {
            const auto s = parse_sampling(t.string("sampling"));
            if (!s) throw InputError("config.theory.sampling must be sufficient_statistics or explicit_rows");
            c.theory.options.sampling = *s;
        }
        for (const char* k : {"replications", "test_draw", "calibration_draw", "variance_floor", "sampling"}) {
            t.skip(k);
        }
        t.finish();
        if (c.theory.replications < 2) throw InputError("config.theory.replications must be at least 2");
        if (c.theory.options.test_draw < 2 || c.theory.options.calibration_draw < 1) {
            throw InputError("config.theory draws must be at least 2 (test) and 1 (calibration)");
        }
        if (!(c.theory.options.variance_floor >= 0.0)) {
            throw InputError("config.theory.variance_floor must be non-negative");
        }
    }
    r.skip("theory");
    r.finish();
    return c;
}

json to_json(const RunConfig& c) {
    json doc;
    if (!c.description.empty()) doc["description"] = c.description;
    doc["experiment"] = to_string(c.experiment);
    doc["generator"] = generator_json(c.generator);
    if (!c.pipelines.empty()) {
        json list = json::array();
        for (const auto& p : c.pipelines) {
            json j;
            j["id"] = p.id;
            j["model"] = to_string(p.model_kind);
            if (p.feature_indices) j["features"] = *p.feature_indices;
            if (!p.files.empty()) j["files"] = p.files;
            list.push_back(std::move(j));
        }
        doc["pipelines"] = std::move(list);
        doc["better"] = c.better;
    }
    doc["rounds"] = c.rounds;
    doc["runs"] = c.runs;
    doc["master_seed"] = c.master_seed;
    json metrics = json::array();
    for (auto m : c.metrics) metrics.push_back(to_string(m));
    doc["metrics"] = std::move(metrics);
    if (c.val_fraction) doc["val_fraction"] = *c.val_fraction;
    doc["test_set"] = to_string(c.test_set);
    doc["vanilla_scope"] = to_string(c.vanilla_scope);
    doc["epsilon"] = c.epsilon;
    doc["histogram_bins"] = c.histogram_bins;
    doc["theory"] = {
        {"replications", c.theory.replications},
        {"test_draw", c.theory.options.test_draw},
        {"calibration_draw", c.theory.options.calibration_draw},
        {"variance_floor", c.theory.options.variance_floor},
        {"sampling", to_string(c.theory.options.sampling)},
    };
    return doc;
}

std::vector<std::string> builtin_config_names() {
    return {"linreg_paper", "logreg_paper", "theory_default"};
}

std::optional<json> builtin_config(std::string_view name) {
    const json paper_x = {{"d", 20}, {"beta_true", 1.0}, {"mu_x", -0.05}, {"x_sd", 0.25}};
    if (name == "linreg_paper") {
        json g = paper_x;
        g.update({{"noise_mean", 1.0}, {"noise_var", 4.0}, {"n_train", 1000}, {"n_val_test", 1000},
                  {"n_remaining_test", 10000}});
        return json{
            {"description", "linear regression, 20 features against the first 19"},
            {"experiment", "linear"},
            {"generator", g},
            {"pipelines", json::array({{{"id", "A"}, {"model", "ols"}},
                                       {{"id", "B"}, {"model", "ols"}, {"drop_features", {19}}}})},
            {"better", "A"},
            {"rounds", 20},
            {"runs", 100},
            {"master_seed", 2023},
            {"metrics", {"quadratic_loss", "calibrated_quadratic_loss"}},
            {"test_set", "shared_across_rounds"},
        };
    }
    if (name == "logreg_paper") {
        json g = paper_x;
        g.update({{"n_train", 1000}, {"n_val_test", 2000}, {"n_remaining_test", 10000}});
        return json{
            {"description", "logistic regression, 20 features against the first 19"},
            {"experiment", "logistic"},
            {"generator", g},
            {"pipelines", json::array({{{"id", "A"}, {"model", "logistic"}},
                                       {{"id", "B"}, {"model", "logistic"}, {"drop_features", {19}}}})},
            {"better", "A"},
            {"rounds", 20},
            {"runs", 1000},
            {"master_seed", 2023},
            {"metrics", {"log_loss", "calibrated_log_loss"}},
            {"test_set", "shared_across_rounds"},
        };
    }
    if (name == "theory_default") {
        return json{
            {"description", "scaling and variance checks for OLS with n = 100, d = 5"},
            {"experiment", "linear"},
            {"generator",
             {{"d", 5}, {"beta_true", 1.0}, {"mu_x", -0.05}, {"x_sd", 0.25}, {"noise_mean", 1.0},
              {"noise_var", 4.0}, {"n_train", 100}, {"n_val_test", 1000}, {"n_remaining_test", 10000}}},
            {"master_seed", 2023},
            {"theory",
             {{"replications", 100000}, {"test_draw", 100000}, {"calibration_draw", 100000000},
              {"variance_floor", 1e-18}, {"sampling", "sufficient_statistics"}}},
        };
    }
    return std::nullopt;
}

RunConfig load_run_config(const std::string& name_or_path) {
    if (auto doc = builtin_config(name_or_path)) return run_config_from_json(*doc);
    if (!std::filesystem::exists(name_or_path)) {
        throw InputError("no builtin config or file named '" + name_or_path + "'");
    }
    return run_config_from_json(read_json_file(name_or_path));
}

json to_json(const ComparisonResult& r) {
    return {{"metric", to_string(r.metric)}, {"acc_hat", r.acc_hat}, {"m", r.m},
            {"risks_a", r.risks_a}, {"risks_b", r.risks_b}};
}

json to_json(const RiskEstimate& r) {
    return {{"metric", to_string(r.metric)}, {"value", r.value}, {"n_eval", r.n_eval}, {"n_cal", r.n_cal}};
}

json to_json(const ExperimentReport& report) {
    json doc;
    doc["schema_version"] = report.schema_version;
    doc["tool_version"] = report.tool_version;
    doc["command"] = report.command;
    doc["config"] = report.config;

    json rounds = json::array();
    for (const auto& round : report.rounds) {
        json list = json::array();
        for (const auto& r : round) list.push_back(to_json(r));
        rounds.push_back(std::move(list));
    }
    doc["rounds"] = std::move(rounds);

    if (report.summary) {
        json acc = json::array();
        for (const auto& a : report.summary->accuracy) {
            acc.push_back({{"metric", to_string(a.metric)},
                           {"mean", a.mean},
                           {"standard_error", a.standard_error ? json(*a.standard_error) : json(nullptr)},
                           {"per_round", a.per_round}});
        }
        json risks = json::array();
        for (const auto& s : report.summary->risks) {
            risks.push_back({{"pipeline", s.pipeline},
                             {"metric", to_string(s.metric)},
                             {"mean", s.mean},
                             {"std", s.std},
                             {"per_round_mean", s.per_round_mean},
                             {"per_round_std", s.per_round_std}});
        }
        doc["summary"] = {{"accuracy", std::move(acc)}, {"risks", std::move(risks)}};
    } else {
        doc["summary"] = nullptr;
    }

    json checks = json::array();
    for (const auto& t : report.theory_checks) {
        checks.push_back({{"check", t.check},
                          {"n", t.n},
                          {"d", t.d},
                          {"replications", t.replications},
                          {"target", t.target},
                          {"ratio_hat", t.ratio_hat},
                          {"ratio_se", t.ratio_se},
                          {"ratio_exact", t.ratio_exact},
                          {"mean_vanilla", t.mean_vanilla},
                          {"mean_calibrated", t.mean_calibrated},
                          {"var_vanilla", t.var_vanilla},
                          {"var_calibrated_scaled", t.var_calibrated_scaled},
                          {"var_diff_se", t.var_diff_se},
                          {"verdict", to_string(t.verdict)}});
    }
    doc["theory_checks"] = std::move(checks);

    json hists = json::array();
    for (const auto& h : report.histograms) {
        hists.push_back({{"pipeline", h.pipeline},
                         {"metric", to_string(h.metric)},
                         {"lo", h.lo},
                         {"hi", h.hi},
                         {"counts", h.counts}});
    }
    doc["histograms"] = std::move(hists);
    doc["wall_clock_seconds"] = report.wall_clock_seconds;
    return doc;
}

ExperimentReport report_from_json(const json& doc) {
    if (!doc.is_object()) throw InputError("report must be a JSON object");
    ExperimentReport report;
    report.schema_version = field<int>(doc, "schema_version");
    if (report.schema_version != kReportSchemaVersion) {
        throw InputError("unsupported report schema_version " + std::to_string(report.schema_version));
    }
    report.tool_version = field<std::string>(doc, "tool_version");
    report.command = field<std::string>(doc, "command");
    report.config = field<json>(doc, "config");

    for (const auto& round : field<json>(doc, "rounds")) {
        std::vector<ComparisonResult> list;
        for (const auto& r : round) {
            ComparisonResult c;
            c.metric = report_metric(r);
            c.acc_hat = field<double>(r, "acc_hat");
            c.m = field<std::size_t>(r, "m");
            c.risks_a = field<std::vector<double>>(r, "risks_a");
            c.risks_b = field<std::vector<double>>(r, "risks_b");
            list.push_back(std::move(c));
        }
        report.rounds.push_back(std::move(list));
    }

    const auto summary = field<json>(doc, "summary");
    if (!summary.is_null()) {
        RoundSummary s;
        for (const auto& a : field<json>(summary, "accuracy")) {
            AccuracySummary acc;
            acc.metric = report_metric(a);
            acc.mean = field<double>(a, "mean");
            const auto se = field<json>(a, "standard_error");
            if (!se.is_null()) acc.standard_error = se.get<double>();
            acc.per_round = field<std::vector<double>>(a, "per_round");
            s.accuracy.push_back(std::move(acc));
        }
        for (const auto& r : field<json>(summary, "risks")) {
            RiskSummary risk;
            risk.pipeline = field<std::string>(r, "pipeline");
            risk.metric = report_metric(r);
            risk.mean = field<double>(r, "mean");
            risk.std = field<double>(r, "std");
            risk.per_round_mean = field<std::vector<double>>(r, "per_round_mean");
            risk.per_round_std = field<std::vector<double>>(r, "per_round_std");
            s.risks.push_back(std::move(risk));
        }
        report.summary = std::move(s);
    }

    for (const auto& t : field<json>(doc, "theory_checks")) {
        TheoryCheck c;
        c.check = field<std::string>(t, "check");
        c.n = field<std::size_t>(t, "n");
        c.d = field<std::size_t>(t, "d");
        c.replications = field<std::size_t>(t, "replications");
        c.target = field<double>(t, "target");
        c.ratio_hat = field<double>(t, "ratio_hat");
        c.ratio_se = field<double>(t, "ratio_se");
        c.ratio_exact = field<double>(t, "ratio_exact");
        c.mean_vanilla = field<double>(t, "mean_vanilla");
        c.mean_calibrated = field<double>(t, "mean_calibrated");
        c.var_vanilla = field<double>(t, "var_vanilla");
        c.var_calibrated_scaled = field<double>(t, "var_calibrated_scaled");
        c.var_diff_se = field<double>(t, "var_diff_se");
        const auto verdict = parse_verdict(field<std::string>(t, "verdict"));
        if (!verdict) throw InputError("report has an unknown verdict");
        c.verdict = *verdict;
        report.theory_checks.push_back(std::move(c));
    }

    for (const auto& h : field<json>(doc, "histograms")) {
        Histogram hist;
        hist.pipeline = field<std::string>(h, "pipeline");
        hist.metric = report_metric(h);
        hist.lo = field<double>(h, "lo");
        hist.hi = field<double>(h, "hi");
        hist.counts = field<std::vector<std::size_t>>(h, "counts");
        report.histograms.push_back(std::move(hist));
    }
    report.wall_clock_seconds = field<double>(doc, "wall_clock_seconds");
    return report;
}

bool ExperimentReport::operator==(const ExperimentReport& other) const {
    return schema_version == other.schema_version && tool_version == other.tool_version &&
           command == other.command && config == other.config && rounds == other.rounds &&
           summary == other.summary && theory_checks == other.theory_checks &&
           histograms == other.histograms && wall_clock_seconds == other.wall_clock_seconds;
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw InputError("write failed: " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

}  // namespace calm
