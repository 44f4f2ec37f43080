#include "ctrnn/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace ctrnn::io {

namespace {

/// Walks a config document and records every problem against its path.
class Reader {
public:
    explicit Reader(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

    std::vector<std::string> issues;

    void fail(const std::string& path, const std::string& msg) { issues.push_back(path + ": " + msg); }

    static std::string join(const std::string& path, const std::string& key)
    {
        return path.empty() ? key : path + "." + key;
    }
    static std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

    /// Looks up `key`; every key looked up in an object counts as known.
    const json* find(const json& obj, const std::string& key, const std::string* path = nullptr)
    {
        if (!obj.is_object())
            return nullptr;
        auto& seen = seen_[&obj];
        seen.keys.insert(key);
        if (path)
            seen.path = *path;
        auto it = obj.find(key);
        return it == obj.end() ? nullptr : &*it;
    }

    /// Reports keys never looked up in objects whose path is known.
    void fail_unknown_keys()
    {
        for (const auto& [obj, seen] : seen_) {
            if (!seen.path)
                continue;
            for (const auto& item : obj->items())
                if (!seen.keys.count(item.key()))
                    fail(join(*seen.path, item.key()), "unknown key");
        }
    }

    std::optional<double> number(const json& obj, const std::string& key, const std::string& path, bool required)
    {
        const json* v = find(obj, key, &path);
        const std::string p = join(path, key);
        if (!v) {
            if (required)
                fail(p, "required");
            return std::nullopt;
        }
        return as_number(*v, p);
    }

    std::optional<double> as_number(const json& v, const std::string& p)
    {
        if (!v.is_number()) {
            fail(p, "expected a number");
            return std::nullopt;
        }
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
            fail(p, "must be finite");
            return std::nullopt;
        }
        return d;
    }

    template <typename Int>
    std::optional<Int> integer(const json& obj, const std::string& key, const std::string& path, bool required)
    {
        const json* v = find(obj, key, &path);
        const std::string p = join(path, key);
        if (!v) {
            if (required)
                fail(p, "required");
            return std::nullopt;
        }
        if (!v->is_number_integer()) {
            fail(p, "expected an integer");
            return std::nullopt;
        }
        if constexpr (std::is_unsigned_v<Int>) {
            if (v->is_number_unsigned())
                return v->get<Int>();
            if (v->get<std::int64_t>() < 0) {
                fail(p, "must be non-negative");
                return std::nullopt;
            }
        }
        return v->get<Int>();
    }

    std::optional<bool> boolean(const json& obj, const std::string& key, const std::string& path)
    {
        const json* v = find(obj, key, &path);
        if (!v)
            return std::nullopt;
        if (!v->is_boolean()) {
            fail(join(path, key), "expected true or false");
            return std::nullopt;
        }
        return v->get<bool>();
    }

    std::optional<std::string> string(const json& obj, const std::string& key, const std::string& path, bool required)
    {
        const json* v = find(obj, key, &path);
        if (!v) {
            if (required)
                fail(join(path, key), "required");
            return std::nullopt;
        }
        if (!v->is_string()) {
            fail(join(path, key), "expected a string");
            return std::nullopt;
        }
        return v->get<std::string>();
    }

    std::optional<Vector> vector(const json& obj, const std::string& key, const std::string& path, bool required)
    {
        const json* v = find(obj, key, &path);
        const std::string p = join(path, key);
        if (!v) {
            if (required)
                fail(p, "required");
            return std::nullopt;
        }
        if (!v->is_array()) {
            fail(p, "expected an array of numbers");
            return std::nullopt;
        }
        Vector out(static_cast<Eigen::Index>(v->size()));
        bool ok = true;
        for (std::size_t i = 0; i < v->size(); ++i) {
            auto d = as_number((*v)[i], index(p, i));
            ok = ok && d.has_value();
            out(static_cast<Eigen::Index>(i)) = d.value_or(0.0);
        }
        return ok ? std::optional<Vector>(out) : std::nullopt;
    }

    template <typename T>
    std::optional<std::vector<T>> list(const json& obj, const std::string& key, const std::string& path)
    {
        const json* v = find(obj, key, &path);
        const std::string p = join(path, key);
        if (!v)
            return std::nullopt;
        if (!v->is_array()) {
            fail(p, "expected an array");
            return std::nullopt;
        }
        std::vector<T> out;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const json& e = (*v)[i];
            if constexpr (std::is_integral_v<T>) {
                if (!e.is_number_integer()) {
                    fail(index(p, i), "expected an integer");
                    return std::nullopt;
                }
                out.push_back(e.get<T>());
            } else {
                auto d = as_number(e, index(p, i));
                if (!d)
                    return std::nullopt;
                out.push_back(*d);
            }
        }
        return out;
    }

    /// Inline nested arrays under `key`, or a headerless CSV named by `key_file`.
    std::optional<Matrix> matrix(const json& obj, const std::string& key, const std::string& path)
    {
        const std::string p = join(path, key);
        if (const json* f = find(obj, key + "_file", &path)) {
            if (!f->is_string()) {
                fail(p + "_file", "expected a path");
                return std::nullopt;
            }
            std::filesystem::path file = f->get<std::string>();
            if (file.is_relative())
                file = base_dir_ / file;
            try {
                return read_matrix_csv(file);
            } catch (const std::exception& e) {
                fail(p + "_file", e.what());
                return std::nullopt;
            }
        }
        const json* v = find(obj, key, &path);
        if (!v)
            return std::nullopt;
        if (!v->is_array()) {
            fail(p, "expected an array of rows");
            return std::nullopt;
        }
        const auto rows = v->size();
        std::size_t cols = 0;
        for (std::size_t i = 0; i < rows; ++i) {
            if (!(*v)[i].is_array()) {
                fail(index(p, i), "expected a row array");
                return std::nullopt;
            }
            if (i == 0)
                cols = (*v)[i].size();
            else if ((*v)[i].size() != cols) {
                fail(index(p, i), "row length " + std::to_string((*v)[i].size()) + " differs from " +
                                      std::to_string(cols));
                return std::nullopt;
            }
        }
        Matrix out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) {
                auto d = as_number((*v)[i][j], index(index(p, i), j));
                if (!d)
                    return std::nullopt;
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = *d;
            }
        return out;
    }

    std::optional<Activation> activation(const json& obj, const std::string& key, const std::string& path)
    {
        auto s = string(obj, key, path, false);
        if (!s)
            return std::nullopt;
        if (*s == "tanh")
            return Activation::Tanh;
        if (*s == "identity")
            return Activation::Identity;
        fail(join(path, key), "unknown activation '" + *s + "' (expected tanh or identity)");
        return std::nullopt;
    }

    const std::filesystem::path& base_dir() const { return base_dir_; }

private:
    struct Seen {
        std::set<std::string> keys;
        std::optional<std::string> path;
    };
    std::filesystem::path base_dir_;
    std::map<const json*, Seen> seen_;
};

std::optional<ModelD> read_model(Reader& rd, const json& j, const std::string& path)
{
    if (!j.is_object()) {
        rd.fail(path, "expected an object");
        return std::nullopt;
    }
    const auto before = rd.issues.size();
    auto w = rd.matrix(j, "w", path);
    if (!w && !rd.find(j, "w") && !rd.find(j, "w_file"))
        rd.fail(Reader::join(path, "w"), "required");
    auto n_units = rd.integer<Eigen::Index>(j, "n_units", path, false);
    auto n_inputs = rd.integer<Eigen::Index>(j, "n_inputs", path, false);
    auto lambda = rd.number(j, "lambda", path, true);
    auto w_in = rd.matrix(j, "w_in", path);
    auto b = rd.vector(j, "b", path, false);
    auto act = rd.activation(j, "activation", path);
    auto gain = rd.number(j, "gain", path, false);
    auto domain = rd.string(j, "time_domain", path, false);
    auto form = rd.string(j, "form", path, false);
    auto delta = rd.number(j, "delta", path, false);
    auto step = rd.number(j, "effective_step", path, false);
    if (rd.issues.size() != before || !w)
        return std::nullopt;

    Params p;
    p.n_units = n_units.value_or(w->rows());
    p.n_inputs = n_inputs.value_or(w_in ? w_in->cols() : 0);
    p.lambda = *lambda;
    p.w = *w;
    p.w_in = w_in ? *w_in : Matrix(p.n_units, 0);
    if (!w_in && p.n_inputs != 0) {
        rd.fail(Reader::join(path, "w_in"), "required when n_inputs > 0");
        return std::nullopt;
    }
    p.b = b ? *b : Vector::Zero(p.n_units);

    TimeDomain td = TimeDomain::Continuous;
    if (domain) {
        if (*domain == "discrete")
            td = TimeDomain::Discrete;
        else if (*domain != "continuous") {
            rd.fail(Reader::join(path, "time_domain"), "expected continuous or discrete");
            return std::nullopt;
        }
    }
    Form fm = Form::Nonlinear;
    if (form) {
        if (*form == "linearized")
            fm = Form::Linearized;
        else if (*form != "nonlinear") {
            rd.fail(Reader::join(path, "form"), "expected nonlinear or linearized");
            return std::nullopt;
        }
    }
    if (td == TimeDomain::Discrete && !delta) {
        rd.fail(Reader::join(path, "delta"), "required for discrete models");
        return std::nullopt;
    }
    const double g = gain.value_or(1.0);
    const double d = delta.value_or(0.0);
    try {
        return ModelD::from_parts(std::move(p), td, fm, act.value_or(Activation::Tanh), g, d,
                                  step.value_or(g * d));
    } catch (const Error& e) {
        rd.fail(path, e.what());
        return std::nullopt;
    }
}

std::optional<EnsembleSpec> read_ensemble(Reader& rd, const json& j, const std::string& path)
{
    if (!j.is_object()) {
        rd.fail(path, "expected an object");
        return std::nullopt;
    }
    EnsembleSpec e;
    const auto before = rd.issues.size();
    e.seed = rd.integer<std::uint64_t>(j, "seed", path, false).value_or(e.seed);
    e.count = rd.integer<int>(j, "count", path, false).value_or(e.count);
    e.n_units = rd.integer<Eigen::Index>(j, "n_units", path, true).value_or(1);
    e.n_inputs = rd.integer<Eigen::Index>(j, "n_inputs", path, false).value_or(0);
    e.weight_std_gain = rd.number(j, "weight_std_gain", path, false).value_or(e.weight_std_gain);
    e.lambda = rd.number(j, "lambda", path, false).value_or(e.lambda);
    e.activation = rd.activation(j, "activation", path).value_or(e.activation);
    e.bias_std = rd.number(j, "bias_std", path, false).value_or(e.bias_std);
    if (rd.issues.size() != before)
        return std::nullopt;
    try {
        e.validate();
    } catch (const Error& err) {
        rd.fail(path, err.what());
        return std::nullopt;
    }
    return e;
}

std::optional<Signal> read_signal(Reader& rd, const json& j, const std::string& path, Eigen::Index n_inputs)
{
    if (!j.is_object()) {
        rd.fail(path, "expected an object");
        return std::nullopt;
    }
    const auto kind = rd.string(j, "kind", path, true);
    if (!kind)
        return std::nullopt;
    const auto before = rd.issues.size();
    std::optional<Signal> out;
    try {
        if (*kind == "zero") {
            out = Signal::zero(n_inputs);
        } else if (*kind == "constant") {
            if (auto v = rd.vector(j, "values", path, true))
                out = Signal::constant(*v);
        } else if (*kind == "step") {
            auto onset = rd.number(j, "onset", path, true);
            auto v = rd.vector(j, "values", path, true);
            if (onset && v)
                out = Signal::step(*onset, *v);
        } else if (*kind == "sine") {
            auto a = rd.vector(j, "amplitudes", path, true);
            auto f = rd.number(j, "frequency", path, true);
            auto ph = rd.number(j, "phase", path, false);
            if (a && f)
                out = Signal::sine(*a, *f, ph.value_or(0.0));
        } else if (*kind == "samples") {
            auto s = rd.matrix(j, "samples", path);
            auto dt = rd.number(j, "sample_step", path, true);
            if (!s && !rd.find(j, "samples") && !rd.find(j, "samples_file"))
                rd.fail(Reader::join(path, "samples"), "required");
            if (s && dt)
                out = Signal::sampled(*s, *dt);
        } else {
            rd.fail(Reader::join(path, "kind"), "unknown signal kind '" + *kind + "'");
        }
        if (auto ts = rd.number(j, "time_scale", path, false); ts && out)
            out = out->rescaled(*ts);
    } catch (const Error& e) {
        rd.fail(path, e.what());
        return std::nullopt;
    }
    if (rd.issues.size() != before)
        return std::nullopt;
    if (out && out->n_inputs() != n_inputs) {
        rd.fail(path, "signal has " + std::to_string(out->n_inputs()) + " channels, model has " +
                          std::to_string(n_inputs) + " inputs");
        return std::nullopt;
    }
    return out;
}

std::optional<Grid> read_grid(Reader& rd, const json& j, const std::string& path)
{
    if (!j.is_object()) {
        rd.fail(path, "expected an object");
        return std::nullopt;
    }
    auto a = rd.number(j, "start", path, false);
    auto b = rd.number(j, "end", path, true);
    auto n = rd.integer<Eigen::Index>(j, "n_steps", path, true);
    if (!b || !n)
        return std::nullopt;
    try {
        return Grid(a.value_or(0.0), *b, *n);
    } catch (const Error& e) {
        rd.fail(path, e.what());
        return std::nullopt;
    }
}

std::vector<Step> read_transforms(Reader& rd, const json& j, const std::string& path)
{
    std::vector<Step> out;
    if (!j.is_array()) {
        rd.fail(path, "expected an array of transform steps");
        return out;
    }
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string p = Reader::index(path, i);
        const json& e = j[i];
        std::optional<std::string> op;
        if (e.is_string())
            op = e.get<std::string>();
        else
            op = rd.string(e, "op", p, true);
        if (!op)
            continue;
        if (*op == "rescale") {
            if (auto tau = rd.number(e, "tau", p, true)) {
                if (!(*tau > 0.0))
                    rd.fail(Reader::join(p, "tau"), "must be > 0");
                else
                    out.push_back(Rescale<double>{*tau});
            }
        } else if (*op == "discretize") {
            if (auto d = rd.number(e, "delta", p, true)) {
                if (!(*d > 0.0))
                    rd.fail(Reader::join(p, "delta"), "must be > 0");
                else
                    out.push_back(Discretize<double>{*d});
            }
        } else if (*op == "linearize") {
            out.push_back(Linearize{});
        } else {
            rd.fail(Reader::join(p, "op"), "unknown transform '" + *op + "'");
        }
    }
    return out;
}

void read_suite(Reader& rd, const json& j, const std::string& path, SuiteConfig& cfg)
{
    if (!j.is_object()) {
        rd.fail(path, "expected an object");
        return;
    }
    auto set = [](auto& field, const auto& opt) {
        if (opt)
            field = *opt;
    };
    set(cfg.threads, rd.integer<unsigned>(j, "threads", path, false));
    set(cfg.include_all_reports, rd.boolean(j, "include_all_reports", path));
    if (const json* e = rd.find(j, "ensemble")) {
        const std::string p = Reader::join(path, "ensemble");
        auto& d = cfg.ensemble;
        set(d.seed, rd.integer<std::uint64_t>(*e, "seed", p, false));
        set(d.weight_std_gain, rd.number(*e, "weight_std_gain", p, false));
        set(d.lambda, rd.number(*e, "lambda", p, false));
        set(d.activation, rd.activation(*e, "activation", p));
        set(d.bias_std, rd.number(*e, "bias_std", p, false));
        set(d.n_inputs, rd.integer<Eigen::Index>(*e, "n_inputs", p, false));
        set(d.h0_scale, rd.number(*e, "h0_scale", p, false));
        set(d.input_amplitude, rd.number(*e, "input_amplitude", p, false));
        set(d.input_frequency, rd.number(*e, "input_frequency", p, false));
    }
    if (const json* e = rd.find(j, "dl")) {
        const std::string p = Reader::join(path, "dl");
        set(cfg.dl.enabled, rd.boolean(*e, "enabled", p));
        set(cfg.dl.sizes, rd.list<int>(*e, "sizes", p));
        set(cfg.dl.count, rd.integer<int>(*e, "count", p, false));
        set(cfg.dl.delta, rd.number(*e, "delta", p, false));
        set(cfg.dl.n_steps, rd.integer<int>(*e, "n_steps", p, false));
    }
    if (const json* e = rd.find(j, "lr")) {
        const std::string p = Reader::join(path, "lr");
        set(cfg.lr.enabled, rd.boolean(*e, "enabled", p));
        set(cfg.lr.sizes, rd.list<int>(*e, "sizes", p));
        set(cfg.lr.count, rd.integer<int>(*e, "count", p, false));
        set(cfg.lr.taus, rd.list<double>(*e, "taus", p));
        set(cfg.lr.horizon, rd.number(*e, "horizon", p, false));
        set(cfg.lr.n_steps, rd.integer<int>(*e, "n_steps", p, false));
        set(cfg.lr.substeps, rd.integer<int>(*e, "substeps", p, false));
        set(cfg.lr.tolerance, rd.number(*e, "tolerance", p, false));
    }
    if (const json* e = rd.find(j, "rd")) {
        const std::string p = Reader::join(path, "rd");
        set(cfg.rd.enabled, rd.boolean(*e, "enabled", p));
        set(cfg.rd.sizes, rd.list<int>(*e, "sizes", p));
        set(cfg.rd.count, rd.integer<int>(*e, "count", p, false));
        set(cfg.rd.taus, rd.list<double>(*e, "taus", p));
        set(cfg.rd.delta_s, rd.number(*e, "delta_s", p, false));
        set(cfg.rd.n_steps, rd.integer<int>(*e, "n_steps", p, false));
        set(cfg.rd.negative_control, rd.boolean(*e, "negative_control", p));
        set(cfg.rd.control_threshold, rd.number(*e, "control_threshold", p, false));
        set(cfg.rd.force_misaligned, rd.boolean(*e, "force_misaligned", p));
    }
    if (const json* e = rd.find(j, "rescale_inverse")) {
        const std::string p = Reader::join(path, "rescale_inverse");
        set(cfg.rescale_inverse.enabled, rd.boolean(*e, "enabled", p));
        set(cfg.rescale_inverse.taus, rd.list<double>(*e, "taus", p));
        set(cfg.rescale_inverse.count, rd.integer<int>(*e, "count", p, false));
        set(cfg.rescale_inverse.n_units, rd.integer<int>(*e, "n_units", p, false));
        set(cfg.rescale_inverse.delta, rd.number(*e, "delta", p, false));
    }
    if (const json* e = rd.find(j, "speed")) {
        const std::string p = Reader::join(path, "speed");
        set(cfg.speed.enabled, rd.boolean(*e, "enabled", p));
        set(cfg.speed.taus, rd.list<double>(*e, "taus", p));
        set(cfg.speed.count, rd.integer<int>(*e, "count", p, false));
        set(cfg.speed.n_units, rd.integer<int>(*e, "n_units", p, false));
        set(cfg.speed.horizon, rd.number(*e, "horizon", p, false));
        set(cfg.speed.n_steps, rd.integer<int>(*e, "n_steps", p, false));
    }
    if (const json* e = rd.find(j, "stability")) {
        const std::string p = Reader::join(path, "stability");
        set(cfg.stability.enabled, rd.boolean(*e, "enabled", p));
        set(cfg.stability.count, rd.integer<int>(*e, "count", p, false));
        set(cfg.stability.n_units, rd.integer<int>(*e, "n_units", p, false));
        set(cfg.stability.delta_low, rd.number(*e, "delta_low", p, false));
        set(cfg.stability.delta_high, rd.number(*e, "delta_high", p, false));
    }
    if (const json* e = rd.find(j, "fixed_point")) {
        const std::string p = Reader::join(path, "fixed_point");
        set(cfg.fixed_point.enabled, rd.boolean(*e, "enabled", p));
        set(cfg.fixed_point.count, rd.integer<int>(*e, "count", p, false));
        set(cfg.fixed_point.n_units, rd.integer<int>(*e, "n_units", p, false));
        set(cfg.fixed_point.deltas, rd.list<double>(*e, "deltas", p));
        set(cfg.fixed_point.tol, rd.number(*e, "tol", p, false));
    }
    for (auto& issue : cfg.validate())
        rd.issues.push_back(std::move(issue));
}

json vector_json(const Vector& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(v(i));
    return a;
}

json matrix_json(const Matrix& m)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row.push_back(m(i, j));
        a.push_back(std::move(row));
    }
    return a;
}

double parse_double(std::string_view field, std::size_t line)
{
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t'))
        field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
        field.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size())
        throw Error("line " + std::to_string(line) + ": not a number: '" + std::string(field) + "'");
    return v;
}

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    for (;;) {
        const auto comma = line.find(',', pos);
        out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (comma == std::string_view::npos)
            return out;
        pos = comma + 1;
    }
}

Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows)
{
    const auto cols = rows.empty() ? 0 : rows.front().size();
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

} // namespace

// ---------------------------------------------------------------------------

ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir,
                              std::optional<std::uint64_t> seed_override)
{
    Reader rd(base_dir);
    ExperimentConfig cfg;
    cfg.raw = doc;
    cfg.base_dir = base_dir;
    if (!doc.is_object())
        throw ConfigError({"(root): expected an object"});

    static const char* known[] = {"model", "transforms", "simulation", "analysis", "verify", "output"};
    for (const auto& [key, _] : doc.items())
        if (std::find(std::begin(known), std::end(known), key) == std::end(known))
            rd.fail(key, "unknown section");

    if (const json* m = rd.find(doc, "model")) {
        if (const json* e = rd.find(*m, "ensemble")) {
            auto spec = read_ensemble(rd, *e, "model.ensemble");
            const int idx = rd.integer<int>(*m, "index", "model", false).value_or(0);
            if (spec) {
                if (seed_override)
                    spec->seed = *seed_override;
                try {
                    cfg.model = random_model(*spec, idx);
                } catch (const Error& err) {
                    rd.fail("model.index", err.what());
                }
            }
        } else {
            cfg.model = read_model(rd, *m, "model");
        }
    }
    if (const json* t = rd.find(doc, "transforms"))
        cfg.transforms = read_transforms(rd, *t, "transforms");

    if (const json* s = rd.find(doc, "simulation")) {
        const std::string p = "simulation";
        SimulationBlock sim;
        const auto before = rd.issues.size();
        const Eigen::Index n = cfg.model ? cfg.model->n_units() : 0;
        const Eigen::Index m = cfg.model ? cfg.model->n_inputs() : 0;
        if (!cfg.model)
            rd.fail(p, "requires a model section");
        sim.h0 = rd.vector(*s, "h0", p, false).value_or(Vector::Zero(n));
        if (cfg.model && sim.h0.size() != n)
            rd.fail("simulation.h0", "length " + std::to_string(sim.h0.size()) + ", expected " + std::to_string(n));
        if (const json* sig = rd.find(*s, "signal"))
            sim.signal = read_signal(rd, *sig, "simulation.signal", m);
        if (const json* g = rd.find(*s, "grid")) {
            if (auto grid = read_grid(rd, *g, "simulation.grid"))
                sim.grid = *grid;
        } else {
            rd.fail("simulation.grid", "required");
        }
        sim.substeps = rd.integer<int>(*s, "substeps", p, false).value_or(kDefaultSubsteps);
        if (sim.substeps < 1)
            rd.fail("simulation.substeps", "must be >= 1");
        if (auto d = rd.number(*s, "discretize", p, false)) {
            if (!(*d > 0.0))
                rd.fail("simulation.discretize", "must be > 0");
            sim.discretize = *d;
        }
        if (rd.issues.size() == before)
            cfg.simulation = std::move(sim);
    }

    if (const json* a = rd.find(doc, "analysis")) {
        const std::string p = "analysis";
        auto& an = cfg.analysis;
        an.x = rd.vector(*a, "x", p, false);
        if (an.x && cfg.model && an.x->size() != cfg.model->n_inputs())
            rd.fail("analysis.x", "length " + std::to_string(an.x->size()) + ", expected " +
                                      std::to_string(cfg.model->n_inputs()));
        an.guess = rd.vector(*a, "guess", p, false);
        if (an.guess && cfg.model && an.guess->size() != cfg.model->n_units())
            rd.fail("analysis.guess", "length " + std::to_string(an.guess->size()) + ", expected " +
                                          std::to_string(cfg.model->n_units()));
        an.tol = rd.number(*a, "tol", p, false).value_or(an.tol);
        if (!(an.tol > 0.0))
            rd.fail("analysis.tol", "must be > 0");
        an.max_iter = rd.integer<int>(*a, "max_iter", p, false).value_or(an.max_iter);
        if (an.max_iter < 0)
            rd.fail("analysis.max_iter", "must be >= 0");
        an.fixed_point = rd.boolean(*a, "fixed_point", p).value_or(an.fixed_point);
        an.stability = rd.boolean(*a, "stability", p).value_or(an.stability);
    }

    if (const json* v = rd.find(doc, "verify"))
        read_suite(rd, *v, "verify", cfg.verify);
    if (seed_override)
        cfg.verify.ensemble.seed = *seed_override;

    if (const json* o = rd.find(doc, "output")) {
        const std::string p = "output";
        cfg.output.directory = rd.string(*o, "directory", p, false);
        if (auto formats = rd.find(*o, "formats")) {
            cfg.output.csv = cfg.output.json = false;
            if (!formats->is_array())
                rd.fail("output.formats", "expected an array");
            else
                for (std::size_t i = 0; i < formats->size(); ++i) {
                    const json& f = (*formats)[i];
                    if (f == "csv")
                        cfg.output.csv = true;
                    else if (f == "json")
                        cfg.output.json = true;
                    else
                        rd.fail(Reader::index("output.formats", i), "expected \"csv\" or \"json\"");
                }
        }
    }

    rd.fail_unknown_keys();
    if (!rd.issues.empty())
        throw ConfigError(std::move(rd.issues));
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file, std::optional<std::uint64_t> seed_override)
{
    std::ifstream in(file);
    if (!in)
        throw ConfigError({file.string() + ": cannot open"});
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError({file.string() + ": " + e.what()});
    }
    return parse_config(doc, file.parent_path(), seed_override);
}

json to_json(const ModelD& model)
{
    const auto& p = model.params();
    json j;
    j["n_units"] = p.n_units;
    j["n_inputs"] = p.n_inputs;
    j["lambda"] = p.lambda;
    j["w"] = matrix_json(p.w);
    j["w_in"] = matrix_json(p.w_in);
    j["b"] = vector_json(p.b);
    j["activation"] = to_string(model.activation());
    j["form"] = to_string(model.form());
    j["time_domain"] = to_string(model.time_domain());
    j["gain"] = model.gain();
    if (model.is_discrete()) {
        j["delta"] = model.delta();
        j["effective_step"] = model.effective_step();
    }
    return j;
}

ModelD model_from_json(const json& j, const std::filesystem::path& base_dir)
{
    Reader rd(base_dir);
    auto m = read_model(rd, j, "model");
    rd.fail_unknown_keys();
    if (!m || !rd.issues.empty())
        throw ConfigError(std::move(rd.issues));
    return *m;
}

json to_json(const Step& step)
{
    struct {
        json operator()(const Rescale<double>& r) const { return {{"op", "rescale"}, {"tau", r.tau}}; }
        json operator()(const Discretize<double>& d) const { return {{"op", "discretize"}, {"delta", d.delta}}; }
        json operator()(const Linearize&) const { return {{"op", "linearize"}}; }
    } v;
    return std::visit(v, step);
}

json to_json(const ParamComparison<double>& c)
{
    json j;
    j["structurally_equal"] = c.structurally_equal;
    j["max_abs_param_diff"] = c.max_abs_param_diff;
    j["max_abs_weight_diff"] = c.max_abs_weight_diff;
    j["gain_diff"] = c.gain_diff;
    j["delta_diff"] = c.delta_diff;
    j["effective_step_diff"] = c.effective_step_diff ? json(*c.effective_step_diff) : json(nullptr);
    return j;
}

json to_json(const TrajectoryD& traj)
{
    json j;
    j["grid"] = {{"start", traj.grid.start}, {"end", traj.grid.end}, {"n_steps", traj.grid.n_steps}};
    json times = json::array();
    for (Eigen::Index k = 0; k < traj.states.rows(); ++k)
        times.push_back(traj.grid.time(k));
    j["times"] = std::move(times);
    j["states"] = matrix_json(traj.states);
    j["inputs_used"] = matrix_json(traj.inputs_used);
    j["form"] = to_string(traj.form);
    j["gain"] = traj.gain;
    j["generator"] = to_string(traj.generator);
    j["diverged"] = traj.diverged;
    j["first_bad_index"] = traj.first_bad_index ? json(*traj.first_bad_index) : json(nullptr);
    return j;
}

json to_json(const StabilityReportD& report)
{
    json j;
    j["domain"] = to_string(report.domain);
    j["classification"] = to_string(report.classification);
    j["margin"] = report.margin;
    json ev = json::array();
    for (const auto& mu : report.eigenvalues)
        ev.push_back({mu.real(), mu.imag()});
    j["eigenvalues"] = std::move(ev);
    return j;
}

json to_json(const FixedPointResultD& result)
{
    json j;
    j["h_star"] = vector_json(result.h_star);
    j["residual"] = result.residual;
    j["iterations"] = result.iterations;
    j["converged"] = result.converged;
    return j;
}

json to_json(const CommutatorReport& report)
{
    json j;
    j["claim"] = to_string(report.claim);
    json a = json::array(), b = json::array();
    for (const auto& s : report.path_a)
        a.push_back(to_json(s));
    for (const auto& s : report.path_b)
        b.push_back(to_json(s));
    j["path_a"] = std::move(a);
    j["path_b"] = std::move(b);
    j["param_comparison"] = to_json(report.param_comparison);
    j["trajectory_max_abs"] = report.trajectory_max_abs;
    j["trajectory_max_rel"] = report.trajectory_max_rel;
    j["tolerance_used"] = report.tolerance_used;
    j["pass"] = report.pass;
    return j;
}

json to_json(const SuiteReport& report)
{
    json checks = json::array();
    for (const auto& c : report.checks) {
        json j;
        j["name"] = c.name;
        j["tested"] = c.tested;
        j["passed"] = c.passed;
        j["tolerance"] = c.tolerance;
        j["worst_max_abs"] = c.worst_max_abs;
        j["pass"] = c.pass;
        json metrics = json::object();
        for (const auto& [k, v] : c.metrics)
            metrics[k] = v;
        j["metrics"] = std::move(metrics);
        json reports = json::array();
        for (const auto& r : c.reports)
            reports.push_back(to_json(r));
        j["reports"] = std::move(reports);
        checks.push_back(std::move(j));
    }
    return {{"pass", report.pass}, {"checks", std::move(checks)}};
}

json to_json(const SuiteConfig& c)
{
    json j;
    j["threads"] = c.threads;
    j["include_all_reports"] = c.include_all_reports;
    j["ensemble"] = {{"seed", c.ensemble.seed},
                     {"weight_std_gain", c.ensemble.weight_std_gain},
                     {"lambda", c.ensemble.lambda},
                     {"activation", to_string(c.ensemble.activation)},
                     {"bias_std", c.ensemble.bias_std},
                     {"n_inputs", c.ensemble.n_inputs},
                     {"h0_scale", c.ensemble.h0_scale},
                     {"input_amplitude", c.ensemble.input_amplitude},
                     {"input_frequency", c.ensemble.input_frequency}};
    j["dl"] = {{"enabled", c.dl.enabled}, {"sizes", c.dl.sizes}, {"count", c.dl.count},
               {"delta", c.dl.delta},     {"n_steps", c.dl.n_steps}};
    j["lr"] = {{"enabled", c.lr.enabled}, {"sizes", c.lr.sizes},     {"count", c.lr.count},
               {"taus", c.lr.taus},       {"horizon", c.lr.horizon}, {"n_steps", c.lr.n_steps},
               {"substeps", c.lr.substeps}, {"tolerance", c.lr.tolerance}};
    j["rd"] = {{"enabled", c.rd.enabled},
               {"sizes", c.rd.sizes},
               {"count", c.rd.count},
               {"taus", c.rd.taus},
               {"delta_s", c.rd.delta_s},
               {"n_steps", c.rd.n_steps},
               {"negative_control", c.rd.negative_control},
               {"control_threshold", c.rd.control_threshold},
               {"force_misaligned", c.rd.force_misaligned}};
    j["rescale_inverse"] = {{"enabled", c.rescale_inverse.enabled}, {"taus", c.rescale_inverse.taus},
                            {"count", c.rescale_inverse.count},     {"n_units", c.rescale_inverse.n_units},
                            {"delta", c.rescale_inverse.delta}};
    j["speed"] = {{"enabled", c.speed.enabled}, {"taus", c.speed.taus},       {"count", c.speed.count},
                  {"n_units", c.speed.n_units}, {"horizon", c.speed.horizon}, {"n_steps", c.speed.n_steps}};
    j["stability"] = {{"enabled", c.stability.enabled},     {"count", c.stability.count},
                      {"n_units", c.stability.n_units},     {"delta_low", c.stability.delta_low},
                      {"delta_high", c.stability.delta_high}};
    j["fixed_point"] = {{"enabled", c.fixed_point.enabled}, {"count", c.fixed_point.count},
                        {"n_units", c.fixed_point.n_units}, {"deltas", c.fixed_point.deltas},
                        {"tol", c.fixed_point.tol}};
    return j;
}

std::uint64_t digest(const ModelD& model)
{
    const std::string canonical = to_json(model).dump();
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string hex_digest(const ModelD& model)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest(model)));
    return buf;
}

std::string format_double(double v)
{
    char buf[40];
    // Locale-independent; %.17g round-trips every finite double.
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, ec == std::errc() ? ptr : buf);
}

void write_trajectory_csv(std::ostream& os, const TrajectoryD& traj)
{
    os << "t";
    for (Eigen::Index i = 0; i < traj.states.cols(); ++i)
        os << ",h_" << (i + 1);
    os << '\n';
    for (Eigen::Index k = 0; k < traj.states.rows(); ++k) {
        os << format_double(traj.grid.time(k));
        for (Eigen::Index i = 0; i < traj.states.cols(); ++i)
            os << ',' << format_double(traj.states(k, i));
        os << '\n';
    }
}

CsvTable read_csv(std::istream& is)
{
    CsvTable out;
    std::string line;
    if (!std::getline(is, line))
        throw Error("empty CSV");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    for (auto f : split(line))
        out.header.emplace_back(f);
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r")
            continue;
        std::vector<double> row;
        for (auto f : split(line))
            row.push_back(parse_double(f, lineno));
        if (row.size() != out.header.size())
            throw Error("line " + std::to_string(lineno) + ": expected " + std::to_string(out.header.size()) +
                        " fields, got " + std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    out.values = rows_to_matrix(rows);
    return out;
}

Matrix read_matrix_csv(const std::filesystem::path& file)
{
    std::ifstream in(file);
    if (!in)
        throw Error("cannot open " + file.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r")
            continue;
        std::vector<double> row;
        for (auto f : split(line))
            row.push_back(parse_double(f, lineno));
        if (!rows.empty() && row.size() != rows.front().size())
            throw Error(file.string() + " line " + std::to_string(lineno) + ": ragged row");
        rows.push_back(std::move(row));
    }
    return rows_to_matrix(rows);
}

} // namespace ctrnn::io
