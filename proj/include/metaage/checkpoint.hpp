#pragma once

#include "metaage/data.hpp"
#include "metaage/metalearner.hpp"
#include "metaage/training.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace metaage {

// MAPC layout, little-endian:
//   version 1 (bare meta-learner): "MAPC", u8 1, u32 K D F H, then f64 arrays
//     W_common, hidden.{W,b}, bn.{gamma,beta,running_mean,running_var}, output.{W,b}
//   version 2 (trained model): "MAPC", u8 2, u8 kind, u8 has_adapter, u32 K D F H,
//     then the kind's arrays (metaage: as version 1; global: W_common;
//     concat: hidden.{W,b}, bn.{...}, output.{W,b}), then adapter.{W,b} if present.

namespace detail {

template <typename Derived>
void put_array(std::string& out, const Eigen::PlainObjectBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        put_f64(out, m.data()[i]);
    }
}

template <typename Derived>
void get_array(ByteReader& in, Eigen::PlainObjectBase<Derived>& m, const std::string& name) {
    const std::size_t bytes = static_cast<std::size_t>(m.size()) * 8;
    in.need(bytes, "array " + name);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const std::size_t at = in.offset();
        const double v = in.f64(name.c_str());
        if (!std::isfinite(v)) {
            in.fail("non-finite value in " + name + " at element " + std::to_string(i), at);
        }
        m.data()[i] = v;
    }
}

inline void put_dims(std::string& out, const Dims& d) {
    put_u32(out, static_cast<std::uint32_t>(d.K));
    put_u32(out, static_cast<std::uint32_t>(d.D));
    put_u32(out, static_cast<std::uint32_t>(d.F));
    put_u32(out, static_cast<std::uint32_t>(d.H));
}

inline Dims get_dims(ByteReader& in) {
    const std::size_t at = in.offset();
    Dims d;
    d.K = in.u32("dims");
    d.D = in.u32("dims");
    d.F = in.u32("dims");
    d.H = in.u32("dims");
    if (d.K < 1 || d.D < 1 || d.F < 1 || d.H < 1) {
        in.fail("dims must all be >= 1", at);
    }
    return d;
}

inline void put_mlp(std::string& out, const TwoLayerMlp& net) {
    put_array(out, net.hidden.weight);
    put_array(out, net.hidden.bias);
    put_array(out, net.bn.gamma);
    put_array(out, net.bn.beta);
    put_array(out, net.bn.running_mean);
    put_array(out, net.bn.running_var);
    put_array(out, net.output.weight);
    put_array(out, net.output.bias);
}

inline TwoLayerMlp get_mlp(ByteReader& in, Eigen::Index n_in, Eigen::Index width, Eigen::Index n_out,
                           const std::string& prefix) {
    TwoLayerMlp net(n_in, width, n_out);
    get_array(in, net.hidden.weight, prefix + "hidden.weight");
    get_array(in, net.hidden.bias, prefix + "hidden.bias");
    get_array(in, net.bn.gamma, prefix + "bn.gamma");
    get_array(in, net.bn.beta, prefix + "bn.beta");
    get_array(in, net.bn.running_mean, prefix + "bn.running_mean");
    const std::size_t at = in.offset();
    get_array(in, net.bn.running_var, prefix + "bn.running_var");
    if ((net.bn.running_var.array() < 0.0).any()) {
        in.fail("negative running variance in " + prefix + "bn", at);
    }
    get_array(in, net.output.weight, prefix + "output.weight");
    get_array(in, net.output.bias, prefix + "output.bias");
    return net;
}

inline double mlp_values(double n_in, double width, double n_out) {
    return n_in * width + width + 4.0 * width + n_out * width + n_out;
}

/// Number of f64 values a payload holds, computed in floating point so that
/// absurd header dims cannot overflow before the length check.
inline double payload_values(ModelKind kind, const Dims& d, bool adapter) {
    const double K = static_cast<double>(d.K), D = static_cast<double>(d.D), F = static_cast<double>(d.F),
                 H = static_cast<double>(d.H);
    double n = 0.0;
    switch (kind) {
        case ModelKind::metaage: n = K * D + mlp_values(F + D + K, H, D); break;
        case ModelKind::global: n = K * D; break;
        case ModelKind::concat: n = mlp_values(D + F, H, K); break;
    }
    return n + (adapter ? D * D + D : 0.0);
}

inline void check_payload_length(const ByteReader& in, ModelKind kind, const Dims& d, bool adapter) {
    const double need = 8.0 * payload_values(kind, d, adapter);
    if (need != static_cast<double>(in.remaining())) {
        const bool short_file = need > static_cast<double>(in.remaining());
        in.fail(std::string(short_file ? "truncated" : "oversized") + " payload: dims require " +
                    std::to_string(static_cast<unsigned long long>(need)) + " bytes, file has " +
                    std::to_string(in.remaining()),
                in.offset());
    }
}

inline void put_meta_payload(std::string& out, const MetaLearnerParams& p) {
    put_array(out, p.W_common);
    put_mlp(out, p.residual);
}

inline MetaLearnerParams get_meta_payload(ByteReader& in, const Dims& d) {
    MetaLearnerParams p;
    p.dims = d;
    p.W_common = Matrix::Zero(d.K, d.D);
    get_array(in, p.W_common, "W_common");
    p.residual = get_mlp(in, d.residual_input(), d.H, d.D, "");
    return p;
}

inline void expect_end(const ByteReader& in) {
    if (in.remaining() != 0) {
        in.fail(std::to_string(in.remaining()) + " trailing bytes", in.offset());
    }
}

inline void read_magic(ByteReader& in) {
    const std::string_view magic = in.take(4, "magic");
    if (magic != "MAPC") {
        in.fail("bad magic '" + std::string(magic) + "', expected 'MAPC'", 0);
    }
}

}  // namespace detail

inline std::string encode_params(const MetaLearnerParams& p) {
    std::string out = "MAPC";
    out.push_back(1);
    detail::put_dims(out, p.dims);
    detail::put_meta_payload(out, p);
    return out;
}

inline MetaLearnerParams decode_params(std::string_view bytes) {
    detail::ByteReader in(bytes, "MAPC");
    detail::read_magic(in);
    const std::uint8_t version = in.u8("version");
    if (version != 1) {
        in.fail("expected a version 1 parameter file, got version " + std::to_string(version), 4);
    }
    const Dims d = detail::get_dims(in);
    detail::check_payload_length(in, ModelKind::metaage, d, false);
    MetaLearnerParams p = detail::get_meta_payload(in, d);
    detail::expect_end(in);
    return p;
}

inline std::string encode_model(const TrainedModel& m) {
    std::string out = "MAPC";
    out.push_back(2);
    out.push_back(static_cast<char>(m.kind));
    out.push_back(m.adapter ? 1 : 0);
    detail::put_dims(out, m.dims);
    switch (m.kind) {
        case ModelKind::metaage: detail::put_meta_payload(out, m.meta); break;
        case ModelKind::global: detail::put_array(out, m.meta.W_common); break;
        case ModelKind::concat: detail::put_mlp(out, m.concat); break;
    }
    if (m.adapter) {
        detail::put_array(out, m.adapter->weight);
        detail::put_array(out, m.adapter->bias);
    }
    return out;
}

/// Reads either version; a version 1 file becomes a metaage model without adapter.
inline TrainedModel decode_model(std::string_view bytes) {
    detail::ByteReader in(bytes, "MAPC");
    detail::read_magic(in);
    const std::uint8_t version = in.u8("version");
    TrainedModel m;
    if (version == 1) {
        m.kind = ModelKind::metaage;
        m.dims = detail::get_dims(in);
        detail::check_payload_length(in, ModelKind::metaage, m.dims, false);
        m.meta = detail::get_meta_payload(in, m.dims);
        detail::expect_end(in);
        return m;
    }
    if (version != 2) {
        in.fail("unsupported version " + std::to_string(version), 4);
    }
    const std::uint8_t kind = in.u8("kind");
    if (kind > 2) {
        in.fail("unknown model kind tag " + std::to_string(kind), 5);
    }
    m.kind = static_cast<ModelKind>(kind);
    const std::uint8_t has_adapter = in.u8("adapter flag");
    if (has_adapter > 1) {
        in.fail("adapter flag must be 0 or 1", 6);
    }
    m.dims = detail::get_dims(in);
    const Dims& d = m.dims;
    detail::check_payload_length(in, m.kind, d, has_adapter != 0);
    switch (m.kind) {
        case ModelKind::metaage: m.meta = detail::get_meta_payload(in, d); break;
        case ModelKind::global:
            m.meta.dims = d;
            m.meta.W_common = Matrix::Zero(d.K, d.D);
            detail::get_array(in, m.meta.W_common, "W_common");
            break;
        case ModelKind::concat: m.concat = detail::get_mlp(in, d.D + d.F, d.H, d.K, "concat."); break;
    }
    if (has_adapter != 0) {
        AffineLayer a(d.D, d.D);
        detail::get_array(in, a.weight, "adapter.weight");
        detail::get_array(in, a.bias, "adapter.bias");
        m.adapter = std::move(a);
    }
    detail::expect_end(in);
    return m;
}

inline void write_params(const std::string& path, const MetaLearnerParams& p) {
    detail::write_file(path, encode_params(p));
}

inline MetaLearnerParams read_params(const std::string& path) { return decode_params(detail::read_file(path)); }

inline void write_model(const std::string& path, const TrainedModel& m) { detail::write_file(path, encode_model(m)); }

inline TrainedModel read_model(const std::string& path) { return decode_model(detail::read_file(path)); }

}  // namespace metaage
