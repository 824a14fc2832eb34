#include "rdsys/export.hpp"

#include <fmt/format.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>

namespace rdsys {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{}", v);
}

void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write '" + path + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw UsageError("write failed for '" + path + "'");
}

std::string value_field_csv(const ValueField& field) {
    std::string s = "t";
    for (int i = 0; i < field.dim(); ++i) s += fmt::format(",x{}", i + 1);
    s += ",k,v\n";
    auto out = std::back_inserter(s);
    for (std::size_t ti = 0; ti < field.time_count(); ++ti) {
        for (int k = 0; k < field.regimes(); ++k) {
            for (std::size_t flat = 0; flat < field.space_count(); ++flat) {
                const Vec x = field.node(flat);
                fmt::format_to(out, "{}", format_number(field.t_grid()[ti]));
                for (int i = 0; i < x.size(); ++i) fmt::format_to(out, ",{}", format_number(x[i]));
                fmt::format_to(out, ",{},{}\n", k, format_number(field.at(ti, k, flat)));
            }
        }
    }
    return s;
}

std::string contraction_trace_csv(const ContractionTrace& trace) {
    std::string s = "iter,beta_dist,sup_dist,se,ratio,theoretical_rate\n";
    for (const auto& st : trace.steps) {
        s += fmt::format("{},{},{},{},{},{}\n", st.iter, format_number(st.beta_dist), format_number(st.sup_dist), format_number(st.se),
                         format_number(st.ratio), format_number(trace.theoretical_rate));
    }
    return s;
}

std::string path_bundle_csv(const PathBundle& bundle, std::size_t max_paths) {
    std::string s = "path,step,t";
    for (int i = 0; i < bundle.dim; ++i) s += fmt::format(",s{}", i + 1);
    s += ",regime,weight\n";
    auto out = std::back_inserter(s);
    const std::size_t np = std::min(max_paths, bundle.paths.size());
    for (std::size_t p = 0; p < np; ++p) {
        const MarketPath& path = bundle.paths[p];
        for (std::size_t i = 0; i < bundle.time_grid.size(); ++i) {
            fmt::format_to(out, "{},{},{}", p, i, format_number(bundle.time_grid[i]));
            const Vec x = path.s_at(i, bundle.dim);
            for (int j = 0; j < x.size(); ++j) fmt::format_to(out, ",{}", format_number(x[j]));
            const double w = path.weight.empty() ? 1.0 : path.weight[i];
            fmt::format_to(out, ",{},{}\n", path.regime[i], format_number(w));
        }
    }
    return s;
}

std::string hedge_paths_csv(const HedgeReport& report) {
    std::string s = "path,H,H0,gains,gains_left,L_T,residual,residual_left,covariation,weight,flagged\n";
    auto out = std::back_inserter(s);
    for (std::size_t p = 0; p < report.paths.size(); ++p) {
        const PathHedge& h = report.paths[p];
        fmt::format_to(out, "{},{},{},{},{},{},{},{},{},{},{}\n", p, format_number(h.H), format_number(h.H0), format_number(h.gains),
                       format_number(h.gains_left), format_number(h.L_T), format_number(h.residual),
                       format_number(h.residual_left), format_number(h.covariation), format_number(h.weight), h.flagged ? 1 : 0);
    }
    return s;
}

std::string hedge_steps_csv(const HedgeReport& report) {
    std::string s = "step,t,mean_L,mean_gains\n";
    for (std::size_t i = 0; i < report.time_grid.size(); ++i) {
        s += fmt::format("{},{},{},{}\n", i, format_number(report.time_grid[i]), format_number(report.mean_L[i]),
                         format_number(report.mean_gains[i]));
    }
    return s;
}

std::string hedge_series_csv(const HedgeReport& report, int dim) {
    std::string s = "path,step,t";
    for (int i = 0; i < dim; ++i) s += fmt::format(",theta{}", i + 1);
    s += ",L,theta0\n";
    auto out = std::back_inserter(s);
    const auto d = static_cast<std::size_t>(dim);
    for (std::size_t p = 0; p < report.L_path.size(); ++p) {
        for (std::size_t i = 0; i < report.L_path[p].size(); ++i) {
            fmt::format_to(out, "{},{},{}", p, i, format_number(report.time_grid[i]));
            for (std::size_t j = 0; j < d; ++j) fmt::format_to(out, ",{}", format_number(report.theta_path[p][i * d + j]));
            fmt::format_to(out, ",{},{}\n", format_number(report.L_path[p][i]), format_number(report.theta0_path[p][i]));
        }
    }
    return s;
}

Json to_json(const Estimate& e) { return Json{{"mean", e.mean}, {"se", e.se}, {"sd", e.sd}, {"n", e.n}}; }

Json to_json(const PdeDiagnostics& d) {
    return Json{{"scheme", d.scheme},
                {"boundary", d.boundary},
                {"time_steps", d.time_steps},
                {"nodes", d.nodes},
                {"max_peclet", d.max_peclet},
                {"max_diffusion_number", d.max_diffusion_number},
                {"picard_max_used", d.picard_max_used},
                {"picard_total", d.picard_total}};
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

}  // namespace rdsys
