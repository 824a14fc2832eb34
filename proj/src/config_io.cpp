#include "rdsys/config_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace rdsys {

namespace {

const Json& req(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ConfigurationError(fmt::format("config: missing key '{}'", key));
    return j.at(key);
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

Json mat_to_json(const Mat& m) {
    Json rows = Json::array();
    for (int r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat mat_from_json(const Json& j, int rows, int cols) {
    if (!j.is_array() || static_cast<int>(j.size()) != rows) {
        throw ConfigurationError(fmt::format("config: expected a {}x{} matrix", rows, cols));
    }
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const Json& row = j[static_cast<size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != cols) {
            throw ConfigurationError(fmt::format("config: expected a {}x{} matrix", rows, cols));
        }
        for (int c = 0; c < cols; ++c) m(r, c) = row[static_cast<size_t>(c)].get<double>();
    }
    return m;
}

Json dense_to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd dense_from_json(const Json& j, int n) {
    if (!j.is_array() || static_cast<int>(j.size()) != n) throw ConfigurationError(fmt::format("config: expected a {0}x{0} matrix", n));
    Eigen::MatrixXd m(n, n);
    for (int r = 0; r < n; ++r) {
        const Json& row = j[static_cast<size_t>(r)];
        if (!row.is_array() || static_cast<int>(row.size()) != n) throw ConfigurationError(fmt::format("config: expected a {0}x{0} matrix", n));
        for (int c = 0; c < n; ++c) m(r, c) = row[static_cast<size_t>(c)].get<double>();
    }
    return m;
}

std::vector<double> vec_from_json(const Json& j, std::size_t n, const char* what) {
    auto v = j.get<std::vector<double>>();
    if (v.size() != n) throw ConfigurationError(fmt::format("config: '{}' needs {} entries, got {}", what, n, v.size()));
    return v;
}

const char* domain_name(DomainKind k) { return k == DomainKind::PositiveOrthant ? "positive_orthant" : "full_space"; }

DomainKind domain_from_string(const std::string& s) {
    if (s == "positive_orthant") return DomainKind::PositiveOrthant;
    if (s == "full_space") return DomainKind::FullSpace;
    throw ConfigurationError("unknown domain kind '" + s + "'");
}

template <class F>
auto wrap(const char* what, F&& fn) {
    try {
        return fn();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(fmt::format("config: malformed {}: {}", what, e.what()));
    }
}

}  // namespace

Json to_json(const Table& t) { return Json{{"t_nodes", t.t_nodes}, {"x_nodes", t.x_nodes}, {"values", t.values}}; }

Table table_from_json(const Json& j) {
    Table t;
    t.t_nodes = req(j, "t_nodes").get<std::vector<double>>();
    t.x_nodes = req(j, "x_nodes").get<std::vector<double>>();
    t.values = req(j, "values").get<std::vector<double>>();
    t.check("table");
    return t;
}

Json to_json(const CoefficientField& f) {
    Json j{{"family", to_string(f.family())}};
    if (f.family() == CoefficientFamily::Tabulated) {
        Json tabs = Json::array();
        for (const auto& per_k : f.tables()) {
            Json row = Json::array();
            for (const auto& t : per_k) row.push_back(to_json(t));
            tabs.push_back(std::move(row));
        }
        j["tables"] = std::move(tabs);
        return j;
    }
    Json base = Json::array();
    for (const auto& m : f.base()) base.push_back(mat_to_json(m));
    j["base"] = std::move(base);
    if (f.family() == CoefficientFamily::Affine) {
        Json slopes = Json::array();
        for (const auto& per_k : f.slopes()) {
            Json row = Json::array();
            for (const auto& m : per_k) row.push_back(mat_to_json(m));
            slopes.push_back(std::move(row));
        }
        j["slopes"] = std::move(slopes);
    }
    return j;
}

CoefficientField coefficient_field_from_json(const Json& j, int regimes, int rows, int cols) {
    return wrap("coefficient field", [&] {
        const auto family = coefficient_family_from_string(req(j, "family").get<std::string>());
        const auto m = static_cast<size_t>(regimes);
        if (family == CoefficientFamily::Tabulated) {
            const Json& tabs = req(j, "tables");
            if (!tabs.is_array() || tabs.size() != m) throw ConfigurationError("config: tabulated field needs tables for every regime");
            std::vector<std::vector<Table>> tables;
            for (const auto& per_k : tabs) {
                std::vector<Table> row;
                for (const auto& t : per_k) row.push_back(table_from_json(t));
                tables.push_back(std::move(row));
            }
            return CoefficientField::tabulated(rows, cols, std::move(tables));
        }
        const Json& base_j = req(j, "base");
        if (!base_j.is_array() || base_j.size() != m) {
            throw ConfigurationError(fmt::format("config: coefficient base needs {} regime matrices", m));
        }
        std::vector<Mat> base;
        for (const auto& b : base_j) base.push_back(mat_from_json(b, rows, cols));
        switch (family) {
            case CoefficientFamily::Constant: return CoefficientField::constant(std::move(base));
            case CoefficientFamily::Multiplicative: return CoefficientField::multiplicative(std::move(base));
            case CoefficientFamily::Affine: {
                const Json& sl = req(j, "slopes");
                if (!sl.is_array() || sl.size() != m) throw ConfigurationError("config: affine slopes needed for every regime");
                std::vector<std::vector<Mat>> slopes;
                for (const auto& per_k : sl) {
                    std::vector<Mat> row;
                    for (const auto& s : per_k) row.push_back(mat_from_json(s, rows, cols));
                    slopes.push_back(std::move(row));
                }
                return CoefficientField::affine(std::move(base), std::move(slopes));
            }
            case CoefficientFamily::Tabulated: break;
        }
        throw ConfigurationError("config: unsupported coefficient family");
    });
}

Json to_json(const RateProfile& p) {
    Json j{{"family", to_string(p.family)}};
    switch (p.family) {
        case ProfileFamily::Constant: j["level"] = p.level; break;
        case ProfileFamily::Logistic:
            j["low"] = p.low;
            j["high"] = p.high;
            j["slope"] = p.slope;
            j["center"] = p.center;
            break;
        case ProfileFamily::Tabulated: j["table"] = to_json(p.table); break;
    }
    return j;
}

RateProfile rate_profile_from_json(const Json& j) {
    return wrap("rate profile", [&] {
        switch (profile_family_from_string(req(j, "family").get<std::string>())) {
            case ProfileFamily::Constant: return RateProfile::constant(req(j, "level").get<double>());
            case ProfileFamily::Logistic:
                return RateProfile::logistic(req(j, "low").get<double>(), req(j, "high").get<double>(), req(j, "slope").get<double>(),
                                             req(j, "center").get<double>());
            case ProfileFamily::Tabulated: {
                RateProfile p;
                p.family = ProfileFamily::Tabulated;
                p.table = table_from_json(req(j, "table"));
                return p;
            }
        }
        throw ConfigurationError("config: unsupported rate profile");
    });
}

Json to_json(const ModelSpec& m) {
    Json entries = Json::array();
    for (const auto& e : m.intensities.entries()) {
        entries.push_back(Json{{"from", e.from}, {"to", e.to}, {"scale", e.scale}, {"profile", to_json(e.profile)}});
    }
    Json j{{"domain", Json{{"kind", domain_name(m.domain.kind)}, {"dim", m.domain.dim}}},
           {"regimes", m.regimes},
           {"brownian_dim", m.brownian_dim},
           {"horizon", m.horizon},
           {"phi_max", m.phi_max},
           {"drift", to_json(m.drift)},
           {"vol", to_json(m.vol)},
           {"intensities", Json{{"bound", m.intensities.bound()}, {"entries", std::move(entries)}}}};
    if (m.crash) {
        j["crash"] = Json{{"stock_recovery", m.crash->stock_recovery}, {"from", m.crash->from}, {"to", m.crash->to}};
    }
    return j;
}

ModelSpec model_from_json(const Json& j) {
    return wrap("model", [&] {
        ModelSpec m;
        const Json& d = req(j, "domain");
        m.domain.kind = domain_from_string(req(d, "kind").get<std::string>());
        m.domain.dim = req(d, "dim").get<int>();
        m.domain.check();
        m.regimes = req(j, "regimes").get<int>();
        m.brownian_dim = req(j, "brownian_dim").get<int>();
        if (m.regimes < 1 || m.regimes > 1024) throw ConfigurationError("config: regimes must lie in [1, 1024]");
        m.horizon = req(j, "horizon").get<double>();
        m.phi_max = get_or(j, "phi_max", 10.0);
        m.drift = coefficient_field_from_json(req(j, "drift"), m.regimes, m.domain.dim, 1);
        m.vol = coefficient_field_from_json(req(j, "vol"), m.regimes, m.domain.dim, m.brownian_dim);
        const Json& in = req(j, "intensities");
        std::vector<IntensityEntry> entries;
        for (const auto& e : req(in, "entries")) {
            entries.push_back({req(e, "from").get<int>(), req(e, "to").get<int>(), get_or(e, "scale", 1.0),
                               rate_profile_from_json(req(e, "profile"))});
        }
        m.intensities = IntensityMatrix(m.regimes, std::move(entries), req(in, "bound").get<double>());
        if (j.contains("crash")) {
            const Json& c = j.at("crash");
            m.crash = CrashDrift{req(c, "stock_recovery").get<double>(), get_or(c, "from", 0), get_or(c, "to", 1)};
        }
        m.check();
        return m;
    });
}

Json to_json(const ClaimSpec& c) {
    const auto& t = c.terminal;
    const auto& b = c.bounds;
    return Json{{"terminal", Json{{"level", t.level},
                                  {"weight", t.weight},
                                  {"scale", t.scale},
                                  {"shape", to_string(t.shape)},
                                  {"strike", t.strike},
                                  {"cap", t.cap}}},
                {"flow_level", c.flow_level},
                {"flow_slope", c.flow_slope},
                {"jump_level", dense_to_json(c.jump_level)},
                {"jump_slope", dense_to_json(c.jump_slope)},
                {"discount", c.discount},
                {"family", to_string(c.family)},
                {"risk_aversion", c.risk_aversion},
                {"truncation", to_string(c.truncation)},
                {"bounds", Json{{"K1", b.K1},
                                {"K2", b.K2},
                                {"K3", b.K3},
                                {"lipschitz", b.lipschitz},
                                {"growth", b.growth},
                                {"discount_cap", b.discount_cap}}}};
}

ClaimSpec claim_from_json(const Json& j, const ModelSpec& model) {
    return wrap("claim", [&] {
        const int m = model.regimes;
        const auto mu = static_cast<size_t>(m);
        ClaimSpec c = ClaimSpec::zero(m);
        const Json& t = req(j, "terminal");
        c.terminal.level = vec_from_json(req(t, "level"), mu, "terminal.level");
        c.terminal.weight = t.contains("weight") ? vec_from_json(t.at("weight"), mu, "terminal.weight") : std::vector<double>(mu, 0.0);
        c.terminal.scale = t.contains("scale") ? vec_from_json(t.at("scale"), mu, "terminal.scale") : std::vector<double>(mu, 1.0);
        c.terminal.shape = payoff_shape_from_string(get_or<std::string>(t, "shape", "none"));
        c.terminal.strike = get_or(t, "strike", 0.0);
        c.terminal.cap = get_or(t, "cap", 0.0);
        if (j.contains("flow_level")) c.flow_level = vec_from_json(j.at("flow_level"), mu, "flow_level");
        if (j.contains("flow_slope")) c.flow_slope = vec_from_json(j.at("flow_slope"), mu, "flow_slope");
        if (j.contains("jump_level")) c.jump_level = dense_from_json(j.at("jump_level"), m);
        if (j.contains("jump_slope")) c.jump_slope = dense_from_json(j.at("jump_slope"), m);
        if (j.contains("discount")) c.discount = vec_from_json(j.at("discount"), mu, "discount");
        c.family = interaction_family_from_string(get_or<std::string>(j, "family", "linear"));
        c.risk_aversion = get_or(j, "risk_aversion", 1.0);
        c.truncation = truncation_mode_from_string(get_or<std::string>(j, "truncation", "automatic"));
        c.check(model);
        if (j.contains("bounds")) {
            const Json& b = j.at("bounds");
            c.bounds = ClaimBounds{req(b, "K1").get<double>(),        req(b, "K2").get<double>(),
                                   req(b, "K3").get<double>(),        req(b, "lipschitz").get<double>(),
                                   req(b, "growth").get<double>(),    req(b, "discount_cap").get<double>()};
        } else {
            c.bounds = derive_bounds(model, c);
        }
        return c;
    });
}

Json to_json(const AxisSpec& a) {
    return Json{{"lo", a.lo}, {"hi", a.hi}, {"count", a.count}, {"spacing", to_string(a.spacing)}};
}

AxisSpec axis_from_json(const Json& j) {
    return wrap("axis", [&] {
        AxisSpec a;
        a.lo = get_or(j, "lo", a.lo);
        a.hi = get_or(j, "hi", a.hi);
        a.count = get_or(j, "count", a.count);
        a.spacing = spacing_from_string(get_or<std::string>(j, "spacing", to_string(a.spacing)));
        return a;
    });
}

Json scenario_to_json(const Scenario& s) {
    std::vector<double> s0(s.s0.data(), s.s0.data() + s.s0.size());
    return Json{{"schema_version", kSchemaVersion},
                {"name", s.name},
                {"description", s.description},
                {"variant", to_string(s.variant)},
                {"axis", to_json(s.axis)},
                {"s0", s0},
                {"k0", s.k0},
                {"model", to_json(s.model)},
                {"claim", to_json(s.claim)}};
}

Scenario scenario_from_json(const Json& j) {
    return wrap("scenario", [&] {
        if (!j.is_object() || !j.contains("schema_version")) throw ConfigurationError("config: missing schema_version");
        const int version = j.at("schema_version").get<int>();
        if (version != kSchemaVersion) {
            throw ConfigurationError(fmt::format("config: schema_version {} not supported (expected {})", version, kSchemaVersion));
        }
        Scenario s;
        s.name = get_or<std::string>(j, "name", "custom");
        s.description = get_or<std::string>(j, "description", "");
        s.model = model_from_json(req(j, "model"));
        s.claim = claim_from_json(req(j, "claim"), s.model);
        s.variant = pde_variant_from_string(get_or<std::string>(j, "variant", "general"));
        if (j.contains("axis")) s.axis = axis_from_json(j.at("axis"));
        const auto s0 = j.contains("s0") ? j.at("s0").get<std::vector<double>>() : std::vector<double>(static_cast<size_t>(s.model.dim()), 1.0);
        if (static_cast<int>(s0.size()) != s.model.dim()) throw ConfigurationError("config: s0 dimension differs from the model");
        s.s0 = Vec(s.model.dim());
        for (int i = 0; i < s.model.dim(); ++i) s.s0[i] = s0[static_cast<size_t>(i)];
        s.k0 = get_or(j, "k0", 0);
        if (s.k0 < 0 || s.k0 >= s.model.regimes) throw ConfigurationError("config: k0 outside the regime range");
        const auto names = shipped_scenario_names();
        if (std::find(names.begin(), names.end(), s.name) != names.end()) {
            Scenario shipped = scenario_by_name(s.name);
            if (to_json(shipped.model) == to_json(s.model) && to_json(shipped.claim) == to_json(s.claim)) {
                s.oracle_kind = shipped.oracle_kind;
                s.oracle_formula = shipped.oracle_formula;
                s.oracle = shipped.oracle;
                s.tolerance = shipped.tolerance;
            }
        }
        return s;
    });
}

Json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return Json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(fmt::format("config file '{}' is not valid JSON: {}", path, e.what()));
    }
}

}  // namespace rdsys
