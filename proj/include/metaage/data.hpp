#pragma once

#include "metaage/layers.hpp"
#include "metaage/matrix.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metaage {

/// One sample. identity_id is diagnostic only and never used for training.
struct FeatureRecord {
    double label = 0.0;  // class-index scale, 0..K-1
    std::optional<double> sigma;
    std::optional<std::uint32_t> identity_id;
    Vector id_feat;   // F
    Vector age_feat;  // D
};

struct Dataset {
    Eigen::Index D = 0;
    Eigen::Index F = 0;
    Eigen::Index K = 0;
    std::vector<FeatureRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }

    bool all_sigmas() const {
        return !records.empty() &&
               std::all_of(records.begin(), records.end(), [](const FeatureRecord& r) { return r.sigma.has_value(); });
    }

    Dataset subset(const std::vector<std::size_t>& indices) const {
        Dataset out{D, F, K, {}};
        out.records.reserve(indices.size());
        for (std::size_t i : indices) {
            out.records.push_back(records.at(i));
        }
        return out;
    }
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Checks the record invariants; throws std::invalid_argument naming the record.
inline void validate_dataset(const Dataset& ds) {
    if (ds.D < 1 || ds.F < 1 || ds.K < 1) {
        throw std::invalid_argument("dataset dims D, F, K must be >= 1");
    }
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        const FeatureRecord& r = ds.records[i];
        const std::string where = "record " + std::to_string(i) + ": ";
        if (r.age_feat.size() != ds.D || r.id_feat.size() != ds.F) {
            throw std::invalid_argument(where + "feature widths do not match dataset dims");
        }
        if (!std::isfinite(r.label) || r.label < 0.0 || r.label > static_cast<double>(ds.K - 1)) {
            throw std::invalid_argument(where + "label outside [0, K-1]");
        }
        if (r.sigma && !(*r.sigma > 0.0 && std::isfinite(*r.sigma))) {
            throw std::invalid_argument(where + "sigma must be finite and > 0");
        }
        if (!r.age_feat.allFinite() || !r.id_feat.allFinite()) {
            throw std::invalid_argument(where + "non-finite feature value");
        }
    }
}

// ---------------------------------------------------------------------------
// MAFV1: "MAFV", u8 version, u32 N D F K, then N records of
//   f32 label, f32 sigma (NaN = absent), u32 identity (0xFFFFFFFF = absent),
//   D x f32 age features, F x f32 identity features. All little-endian.
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kNoIdentity = 0xFFFFFFFFu;
inline constexpr std::size_t kMafvHeaderBytes = 4 + 1 + 4 * 4;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
}

inline void put_f32(std::string& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

/// Bounds-checked little-endian reader over an in-memory file.
class ByteReader {
public:
    ByteReader(std::string_view bytes, std::string_view format) : bytes_(bytes), format_(format) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::size_t n, const std::string& what) const {
        if (remaining() < n) {
            throw ParseError(std::string(format_) + ": truncated " + what + ": expected " + std::to_string(n) +
                                 " more bytes, got " + std::to_string(remaining()),
                             pos_);
        }
    }

    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += 4;
        return v;
    }

    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += 8;
        return v;
    }

    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

    std::string_view take(std::size_t n, const char* what) {
        need(n, what);
        std::string_view v = bytes_.substr(pos_, n);
        pos_ += n;
        return v;
    }

    [[noreturn]] void fail(const std::string& what, std::size_t at) const {
        throw ParseError(std::string(format_) + ": " + what, at);
    }

private:
    std::string_view bytes_;
    std::string_view format_;
    std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path + " for reading");
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("write failed for " + path);
    }
}

}  // namespace detail

inline std::size_t mafv_record_bytes(std::size_t D, std::size_t F) { return 12 + 4 * (D + F); }

inline std::string encode_features(const Dataset& ds) {
    validate_dataset(ds);
    std::string out;
    out.reserve(kMafvHeaderBytes + ds.size() * mafv_record_bytes(ds.D, ds.F));
    out += "MAFV";
    out.push_back(1);
    detail::put_u32(out, static_cast<std::uint32_t>(ds.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(ds.D));
    detail::put_u32(out, static_cast<std::uint32_t>(ds.F));
    detail::put_u32(out, static_cast<std::uint32_t>(ds.K));
    for (const FeatureRecord& r : ds.records) {
        detail::put_f32(out, r.label);
        detail::put_f32(out, r.sigma ? *r.sigma : std::numeric_limits<double>::quiet_NaN());
        detail::put_u32(out, r.identity_id.value_or(kNoIdentity));
        for (Eigen::Index d = 0; d < ds.D; ++d) {
            detail::put_f32(out, r.age_feat(d));
        }
        for (Eigen::Index f = 0; f < ds.F; ++f) {
            detail::put_f32(out, r.id_feat(f));
        }
    }
    return out;
}

inline Dataset decode_features(std::string_view bytes) {
    detail::ByteReader in(bytes, "MAFV1");
    const std::string_view magic = in.take(4, "magic");
    if (magic != "MAFV") {
        in.fail("bad magic '" + std::string(magic) + "', expected 'MAFV'", 0);
    }
    const std::uint8_t version = in.u8("version");
    if (version != 1) {
        in.fail("unsupported version " + std::to_string(version), 4);
    }
    const std::uint32_t n = in.u32("header");
    Dataset ds;
    ds.D = in.u32("header");
    ds.F = in.u32("header");
    ds.K = in.u32("header");
    if (ds.D == 0 || ds.F == 0 || ds.K == 0) {
        in.fail("dims D, F, K must be >= 1", 9);
    }
    const std::size_t rec = mafv_record_bytes(static_cast<std::size_t>(ds.D), static_cast<std::size_t>(ds.F));
    const std::size_t expected = kMafvHeaderBytes + static_cast<std::size_t>(n) * rec;
    if (bytes.size() < expected) {
        const std::size_t complete = (bytes.size() - kMafvHeaderBytes) / rec;
        throw ParseError("MAFV1: truncated file: header declares " + std::to_string(n) + " records (" +
                             std::to_string(expected) + " bytes), actual length " + std::to_string(bytes.size()) +
                             " bytes; record " + std::to_string(complete) + " is incomplete",
                         kMafvHeaderBytes + complete * rec);
    }
    if (bytes.size() > expected) {
        in.fail(std::to_string(bytes.size() - expected) + " trailing bytes after last record", expected);
    }

    ds.records.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        FeatureRecord r;
        const std::size_t at = in.offset();
        r.label = in.f32("label");
        if (!std::isfinite(r.label) || r.label < 0.0 || r.label > static_cast<double>(ds.K - 1)) {
            in.fail("record " + std::to_string(i) + ": label outside [0, K-1]", at);
        }
        const float sigma = in.f32("sigma");
        if (!std::isnan(sigma)) {
            if (!(sigma > 0.0f) || !std::isfinite(sigma)) {
                in.fail("record " + std::to_string(i) + ": sigma must be > 0 or NaN", at + 4);
            }
            r.sigma = sigma;
        }
        const std::uint32_t id = in.u32("identity");
        if (id != kNoIdentity) {
            r.identity_id = id;
        }
        r.age_feat.resize(ds.D);
        for (Eigen::Index d = 0; d < ds.D; ++d) {
            const std::size_t fat = in.offset();
            const float v = in.f32("age features");
            if (!std::isfinite(v)) {
                in.fail("record " + std::to_string(i) + ": non-finite age feature " + std::to_string(d), fat);
            }
            r.age_feat(d) = v;
        }
        r.id_feat.resize(ds.F);
        for (Eigen::Index f = 0; f < ds.F; ++f) {
            const std::size_t fat = in.offset();
            const float v = in.f32("identity features");
            if (!std::isfinite(v)) {
                in.fail("record " + std::to_string(i) + ": non-finite identity feature " + std::to_string(f), fat);
            }
            r.id_feat(f) = v;
        }
        ds.records.push_back(std::move(r));
    }
    return ds;
}

inline void write_features(const std::string& path, const Dataset& ds) { detail::write_file(path, encode_features(ds)); }

inline Dataset read_features(const std::string& path) { return decode_features(detail::read_file(path)); }

/// Rounds every stored value to float precision, so the dataset equals what
/// a MAFV1 round trip would produce.
inline void quantize_to_f32(Dataset& ds) {
    auto q = [](double v) { return static_cast<double>(static_cast<float>(v)); };
    for (FeatureRecord& r : ds.records) {
        r.label = q(r.label);
        if (r.sigma) {
            r.sigma = q(*r.sigma);
        }
        r.age_feat = r.age_feat.unaryExpr(q);
        r.id_feat = r.id_feat.unaryExpr(q);
    }
}

// ---------------------------------------------------------------------------
// Splits and batching
// ---------------------------------------------------------------------------

struct Split {
    Dataset train;
    Dataset test;
};

/// `train_fraction` of the data goes to train, the rest to test. With
/// `by_identity`, whole identities are assigned so no person is in both.
inline Split split(const Dataset& ds, double train_fraction, std::uint64_t seed, bool by_identity) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("split: train fraction must lie in (0, 1)");
    }
    Rng rng(seed);
    std::vector<std::size_t> train_idx, test_idx;
    if (by_identity) {
        std::set<std::uint32_t> ids;
        for (const FeatureRecord& r : ds.records) {
            if (!r.identity_id) {
                throw std::invalid_argument("split: identity split requested but a record has no identity_id");
            }
            ids.insert(*r.identity_id);
        }
        std::vector<std::uint32_t> order(ids.begin(), ids.end());
        const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(order.size())));
        if (order.size() < 2 || n_train == 0 || n_train == order.size()) {
            throw std::invalid_argument("split: " + std::to_string(order.size()) +
                                        " identities are too few to honor the requested fractions");
        }
        std::shuffle(order.begin(), order.end(), rng);
        const std::set<std::uint32_t> train_ids(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        for (std::size_t i = 0; i < ds.size(); ++i) {
            (train_ids.count(*ds.records[i].identity_id) != 0 ? train_idx : test_idx).push_back(i);
        }
    } else {
        std::vector<std::size_t> order(ds.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(order.size())));
        if (n_train == 0 || n_train == order.size()) {
            throw std::invalid_argument("split: " + std::to_string(order.size()) +
                                        " records are too few to honor the requested fractions");
        }
        std::shuffle(order.begin(), order.end(), rng);
        train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        test_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
        std::sort(train_idx.begin(), train_idx.end());
        std::sort(test_idx.begin(), test_idx.end());
    }
    return {ds.subset(train_idx), ds.subset(test_idx)};
}

/// Fold `fold` of a seeded k-way partition is the test set.
inline Split kfold_split(const Dataset& ds, int k, int fold, std::uint64_t seed, bool by_identity) {
    if (k < 2 || fold < 0 || fold >= k) {
        throw std::invalid_argument("kfold_split: need k >= 2 and 0 <= fold < k");
    }
    Rng rng(seed);
    std::vector<std::size_t> train_idx, test_idx;
    if (by_identity) {
        std::set<std::uint32_t> ids;
        for (const FeatureRecord& r : ds.records) {
            if (!r.identity_id) {
                throw std::invalid_argument("kfold_split: a record has no identity_id");
            }
            ids.insert(*r.identity_id);
        }
        if (ids.size() < static_cast<std::size_t>(k)) {
            throw std::invalid_argument("kfold_split: fewer identities than folds");
        }
        std::vector<std::uint32_t> order(ids.begin(), ids.end());
        std::shuffle(order.begin(), order.end(), rng);
        std::map<std::uint32_t, int> fold_of;
        for (std::size_t i = 0; i < order.size(); ++i) {
            fold_of[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
        }
        for (std::size_t i = 0; i < ds.size(); ++i) {
            (fold_of.at(*ds.records[i].identity_id) == fold ? test_idx : train_idx).push_back(i);
        }
    } else {
        if (ds.size() < static_cast<std::size_t>(k)) {
            throw std::invalid_argument("kfold_split: fewer records than folds");
        }
        std::vector<std::size_t> order(ds.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<int> fold_of(ds.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            fold_of[order[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
        }
        for (std::size_t i = 0; i < ds.size(); ++i) {
            (fold_of[i] == fold ? test_idx : train_idx).push_back(i);
        }
    }
    return {ds.subset(train_idx), ds.subset(test_idx)};
}

/// Seeded per-epoch shuffle cut into batches; a final batch smaller than 2
/// is dropped (train-mode batch norm needs two rows).
inline std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                     std::uint64_t epoch) {
    if (batch_size < 2) {
        throw std::invalid_argument("batch size must be >= 2, got " + std::to_string(batch_size));
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
    Rng rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        if (end - start < 2) {
            break;
        }
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

/// Stacked feature matrices for a set of records.
struct Batch {
    Matrix identity;  // B x F
    Matrix age;       // B x D
    std::vector<double> labels;
    std::vector<std::optional<double>> sigmas;
};

inline Batch gather(const Dataset& ds, const std::vector<std::size_t>& indices) {
    Batch b;
    const auto n = static_cast<Eigen::Index>(indices.size());
    b.identity.resize(n, ds.F);
    b.age.resize(n, ds.D);
    b.labels.reserve(indices.size());
    b.sigmas.reserve(indices.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const FeatureRecord& r = ds.records.at(indices[static_cast<std::size_t>(i)]);
        b.identity.row(i) = r.id_feat.transpose();
        b.age.row(i) = r.age_feat.transpose();
        b.labels.push_back(r.label);
        b.sigmas.push_back(r.sigma);
    }
    return b;
}

inline Batch gather_all(const Dataset& ds) {
    std::vector<std::size_t> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i] = i;
    }
    return gather(ds, all);
}

}  // namespace metaage
