#pragma once

// Plain-text model files. Doubles are written in shortest round-trip form, so
// a loaded model reproduces the in-memory one bit for bit.

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "stvine/cv.hpp"
#include "stvine/pit.hpp"
#include "stvine/vine.hpp"

namespace stvine {

inline constexpr std::string_view kModelMagic = "stvine-model";
inline constexpr int kModelVersion = 1;

struct ModelBundle {
    ModelKind kind = ModelKind::Vine;
    MarginalFamily marginal = MarginalFamily::Gumbel;
    std::vector<std::string> variables;
    std::vector<std::string> training_stations;
    MarginalTable marginals;
    VineModel model;  // unused for the kriging kind apart from the covariate list
};

namespace detail {

inline void write_spec(std::ostream& os, const BivariateCopulaSpec& s) {
    os << family_name(s.family) << ' ' << s.rotation << ' ' << format_double(s.theta) << ' ' << format_double(s.df);
}

inline void write_st_copula(std::ostream& os, const StCopula& st) {
    const std::size_t B = st.bins.n_bins();
    os << "bins " << B << '\n' << "edges";
    for (double e : st.bins.edges) os << ' ' << format_double(e);
    os << '\n' << "means";
    for (double m : st.bins.means) os << ' ' << format_double(m);
    os << '\n' << "counts";
    for (std::size_t c : st.bins.counts) os << ' ' << c;
    os << '\n' << "poly " << st.poly.degree << ' ' << format_double(st.poly.h_max) << '\n';
    for (std::size_t lag = 0; lag < kNumLags; ++lag) {
        os << "coef " << lag << ' ' << st.poly.coef[lag].size();
        for (double c : st.poly.coef[lag]) os << ' ' << format_double(c);
        os << '\n' << "residuals " << lag;
        for (double r : st.poly.residuals[lag]) os << ' ' << format_double(r);
        os << '\n';
        for (std::size_t b = 0; b < B; ++b) {
            os << "proto " << lag << ' ' << b + 1 << ' ';
            write_spec(os, st.protos[lag][b]);
            os << '\n';
        }
    }
}

class TokenReader {
public:
    explicit TokenReader(std::istream& is) : is_(is) {}

    std::string word() {
        std::string w;
        if (!(is_ >> w)) throw SchemaError("model file ended early");
        return w;
    }

    void expect(std::string_view w) {
        const std::string got = word();
        if (got != w) throw SchemaError("model file: expected '" + std::string(w) + "', found '" + got + "'");
    }

    double real() {
        const std::string w = word();
        double x = 0.0;
        const auto r = std::from_chars(w.data(), w.data() + w.size(), x);
        if (r.ec != std::errc() || r.ptr != w.data() + w.size())
            throw SchemaError("model file: '" + w + "' is not a number");
        return x;
    }

    std::size_t count() {
        const std::string w = word();
        std::size_t x = 0;
        const auto r = std::from_chars(w.data(), w.data() + w.size(), x);
        if (r.ec != std::errc() || r.ptr != w.data() + w.size())
            throw SchemaError("model file: '" + w + "' is not a count");
        return x;
    }

    int integer() {
        const std::string w = word();
        int x = 0;
        const auto r = std::from_chars(w.data(), w.data() + w.size(), x);
        if (r.ec != std::errc() || r.ptr != w.data() + w.size())
            throw SchemaError("model file: '" + w + "' is not an integer");
        return x;
    }

private:
    std::istream& is_;
};

inline BivariateCopulaSpec read_spec(TokenReader& in) {
    BivariateCopulaSpec s;
    try {
        s.family = parse_family(in.word());
    } catch (const DomainError& e) {
        throw SchemaError(std::string("model file: ") + e.what());
    }
    s.rotation = in.integer();
    s.theta = in.real();
    s.df = in.real();
    return s;
}

inline StCopula read_st_copula(TokenReader& in) {
    StCopula st;
    in.expect("bins");
    const std::size_t B = in.count();
    if (B == 0) throw SchemaError("model file: copula with no bins");
    in.expect("edges");
    for (std::size_t i = 0; i <= B; ++i) st.bins.edges.push_back(in.real());
    in.expect("means");
    for (std::size_t i = 0; i < B; ++i) st.bins.means.push_back(in.real());
    in.expect("counts");
    for (std::size_t i = 0; i < B; ++i) st.bins.counts.push_back(in.count());
    in.expect("poly");
    st.poly.degree = in.integer();
    st.poly.h_max = in.real();
    for (std::size_t lag = 0; lag < kNumLags; ++lag) {
        in.expect("coef");
        if (in.count() != lag) throw SchemaError("model file: coefficient lags out of order");
        const std::size_t n = in.count();
        for (std::size_t k = 0; k < n; ++k) st.poly.coef[lag].push_back(in.real());
        in.expect("residuals");
        in.count();
        for (std::size_t b = 0; b < B; ++b) st.poly.residuals[lag].push_back(in.real());
        for (std::size_t b = 0; b < B; ++b) {
            in.expect("proto");
            in.count();
            in.count();
            st.protos[lag].push_back(read_spec(in));
        }
    }
    return st;
}

}  // namespace detail

inline void save_model(std::ostream& os, const ModelBundle& mb) {
    using detail::format_double;
    const VineModel& m = mb.model;
    os << kModelMagic << ' ' << kModelVersion << '\n';
    os << "kind " << model_kind_name(mb.kind) << '\n';
    os << "marginal_family " << marginal_family_name(mb.marginal) << '\n';
    os << "variables " << mb.variables.size();
    for (const auto& v : mb.variables) os << ' ' << v;
    os << '\n' << "training " << mb.training_stations.size();
    for (const auto& s : mb.training_stations) os << ' ' << s;
    os << '\n';
    os << "neighbors " << m.neighbors.d_spatial << ' ' << m.neighbors.dc_spatial << ' '
       << (m.neighbors.colocated_covariates ? 1 : 0) << ' ' << m.neighbors.lags << ' ' << m.neighbors.covariates.size();
    for (std::size_t c : m.neighbors.covariates) os << ' ' << c;
    os << '\n' << "marginals " << mb.marginals.size() << '\n';
    for (const auto& [key, e] : mb.marginals.entries())
        os << key.first << ' ' << key.second << ' ' << marginal_family_name(e.spec.family) << ' '
           << format_double(e.spec.a) << ' ' << format_double(e.spec.b) << ' ' << format_double(e.spec.s) << ' '
           << format_double(e.ks.statistic) << ' ' << format_double(e.ks.p_value) << '\n';
    if (mb.kind != ModelKind::Kriging) {
        os << "dependent\n";
        detail::write_st_copula(os, m.dependent);
        for (std::size_t c = 0; c < m.covariate.size(); ++c) {
            os << "covariate " << c << '\n';
            detail::write_st_copula(os, m.covariate[c]);
        }
        os << "upper " << m.upper.size() << '\n';
        for (std::size_t i = 0; i < m.upper.size(); ++i) {
            detail::write_spec(os, m.upper[i]);
            os << '\n';
        }
    }
    os << "end\n";
}

inline ModelBundle load_model(std::istream& is) {
    detail::TokenReader in(is);
    ModelBundle mb;
    in.expect(kModelMagic);
    if (in.integer() != kModelVersion) throw SchemaError("unsupported model file version");
    in.expect("kind");
    try {
        mb.kind = parse_model_kind(in.word());
        in.expect("marginal_family");
        mb.marginal = parse_marginal_family(in.word());
    } catch (const DomainError& e) {
        throw SchemaError(std::string("model file: ") + e.what());
    }
    in.expect("variables");
    for (std::size_t i = 0, n = in.count(); i < n; ++i) mb.variables.push_back(in.word());
    in.expect("training");
    for (std::size_t i = 0, n = in.count(); i < n; ++i) mb.training_stations.push_back(in.word());
    VineModel& m = mb.model;
    in.expect("neighbors");
    m.neighbors.d_spatial = in.count();
    m.neighbors.dc_spatial = in.count();
    m.neighbors.colocated_covariates = in.count() != 0;
    m.neighbors.lags = in.integer();
    if (m.neighbors.lags < 1 || m.neighbors.lags > kNumLags) throw SchemaError("model file: neighbor lags must be 1 or 2");
    m.neighbors.covariates.clear();
    for (std::size_t i = 0, n = in.count(); i < n; ++i) m.neighbors.covariates.push_back(in.count());
    in.expect("marginals");
    for (std::size_t i = 0, n = in.count(); i < n; ++i) {
        const std::string st = in.word(), var = in.word();
        MarginalEntry e;
        e.spec.family = parse_marginal_family(in.word());
        e.spec.a = in.real();
        e.spec.b = in.real();
        e.spec.s = in.real();
        e.ks.statistic = in.real();
        e.ks.p_value = in.real();
        mb.marginals.set(st, var, e);
    }
    if (mb.kind != ModelKind::Kriging) {
        in.expect("dependent");
        m.dependent = detail::read_st_copula(in);
        for (std::size_t c = 0; c < m.neighbors.covariates.size(); ++c) {
            in.expect("covariate");
            in.count();
            m.covariate.push_back(detail::read_st_copula(in));
        }
        in.expect("upper");
        const std::size_t n = in.count();
        const std::size_t d = m.dimension();
        if (n != d * (d - 1) / 2)
            throw SchemaError("model file: " + std::to_string(n) + " upper-tree copulas do not match dimension " +
                              std::to_string(d));
        for (std::size_t i = 0; i < n; ++i) m.upper.push_back(detail::read_spec(in));
    }
    in.expect("end");
    return mb;
}

inline std::string model_to_string(const ModelBundle& mb) {
    std::ostringstream os;
    save_model(os, mb);
    return os.str();
}

inline ModelBundle model_from_string(const std::string& s) {
    std::istringstream is(s);
    return load_model(is);
}

}  // namespace stvine
