#pragma once

// Dataset ingestion: delimited text with a column-role schema (one-hot for
// categoricals, per-column min-max for numerics), IDX image/label pairs, the
// unit-ball normalisation, and the half-split evaluation protocol (scale
// fitted on the train half only).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "loss.hpp"
#include "rng.hpp"

namespace pbw {

struct Dataset {
    std::vector<double> features;  // row-major, size() * dim
    std::vector<std::int32_t> labels;
    std::size_t dim = 0;
    std::size_t num_classes = 0;
    std::string source;
    std::uint64_t preprocessing_hash = 0;
    std::size_t dropped_rows = 0;

    std::size_t size() const { return labels.size(); }

    DataView view() const { return DataView{features, labels, dim}; }

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(features).subspan(i * dim, dim);
    }

    void validate() const {
        if (size() < 2) throw std::invalid_argument("dataset: need at least 2 examples");
        if (num_classes < 2) throw std::invalid_argument("dataset: need at least 2 classes");
        if (features.size() != size() * dim)
            throw std::invalid_argument("dataset: feature matrix shape mismatch");
        for (double v : features)
            if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite feature");
        for (std::int32_t y : labels)
            if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
                throw std::invalid_argument("dataset: label out of range");
    }

    std::uint64_t content_hash() const {
        std::uint64_t h = fnv1a64_bytes(features.data(), features.size() * sizeof(double));
        h = fnv1a64_bytes(labels.data(), labels.size() * sizeof(std::int32_t), h);
        h = fnv1a64_bytes(&dim, sizeof(dim), h);
        h = fnv1a64_bytes(&num_classes, sizeof(num_classes), h);
        return h;
    }

    double max_row_norm() const {
        double best = 0.0;
        for (std::size_t i = 0; i < size(); ++i) {
            double s = 0.0;
            for (double v : row(i)) s += v * v;
            best = std::max(best, std::sqrt(s));
        }
        return best;
    }
};

// --------------------------------------------------------------------------
// CSV with a schema file. Schema lines are "column_index:role" with role in
// {label, numeric, categorical, ignore}; an optional "delimiter:<comma|
// whitespace|semicolon|tab>" line selects the field separator. Exactly one
// label column is required. Rows with missing values ('?' or an empty
// field) are dropped and counted.
// --------------------------------------------------------------------------

enum class ColumnRole { Label, Numeric, Categorical, Ignore };

struct CsvSchema {
    std::map<std::size_t, ColumnRole> roles;
    char delimiter = ',';
    bool whitespace = false;

    std::size_t label_column() const {
        std::size_t found = 0, col = 0;
        for (const auto& [idx, role] : roles)
            if (role == ColumnRole::Label) {
                ++found;
                col = idx;
            }
        if (found != 1) throw std::invalid_argument("schema: exactly one label column required");
        return col;
    }
};

inline CsvSchema read_schema(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open schema: " + path);
    CsvSchema schema;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) throw std::runtime_error("schema: bad line: " + line);
        const std::string key = line.substr(0, colon);
        const std::string value = line.substr(colon + 1);
        if (key == "delimiter") {
            if (value == "comma") schema.delimiter = ',';
            else if (value == "semicolon") schema.delimiter = ';';
            else if (value == "tab") schema.delimiter = '\t';
            else if (value == "whitespace") schema.whitespace = true;
            else throw std::runtime_error("schema: unknown delimiter: " + value);
            continue;
        }
        ColumnRole role;
        if (value == "label") role = ColumnRole::Label;
        else if (value == "numeric") role = ColumnRole::Numeric;
        else if (value == "categorical") role = ColumnRole::Categorical;
        else if (value == "ignore") role = ColumnRole::Ignore;
        else throw std::runtime_error("schema: unknown role: " + value);
        schema.roles[static_cast<std::size_t>(std::stoul(key))] = role;
    }
    (void)schema.label_column();
    return schema;
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line, const CsvSchema& schema) {
    std::vector<std::string> fields;
    if (schema.whitespace) {
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) fields.push_back(tok);
        return fields;
    }
    std::string cur;
    for (char c : line) {
        if (c == schema.delimiter) {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline bool missing(const std::string& field) { return field.empty() || field == "?"; }

}  // namespace detail

/// Loads a delimited text file under a schema. Categorical columns are
/// one-hot encoded (category order = first appearance), numeric columns are
/// min-maxed to [0,1], labels are densely re-encoded in first-appearance
/// order. Unit-ball normalisation is applied by the half-split protocol or
/// explicitly by the caller, not here, so the scale can be fitted on the
/// train half alone.
inline Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    (void)schema.label_column();  // enforce exactly-one-label up front

    std::vector<std::vector<std::string>> rows;
    std::size_t dropped = 0;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        auto fields = detail::split_fields(line, schema);
        bool drop = false;
        for (const auto& [idx, role] : schema.roles) {
            if (role == ColumnRole::Ignore) continue;
            if (idx >= fields.size() || detail::missing(fields[idx])) {
                drop = true;
                break;
            }
        }
        if (drop) {
            ++dropped;
            continue;
        }
        rows.push_back(std::move(fields));
    }
    if (rows.size() < 2) throw std::runtime_error("csv: fewer than 2 usable rows in " + path);

    // First pass over kept rows: label dictionary, category dictionaries,
    // numeric ranges.
    std::vector<std::string> label_order;
    std::map<std::string, std::int32_t> label_code;
    std::map<std::size_t, std::vector<std::string>> cat_order;
    std::map<std::size_t, std::map<std::string, std::size_t>> cat_code;
    std::map<std::size_t, std::pair<double, double>> num_range;
    for (const auto& fields : rows) {
        for (const auto& [idx, role] : schema.roles) {
            const std::string& f = fields[idx];
            if (role == ColumnRole::Label) {
                if (!label_code.count(f)) {
                    label_code[f] = static_cast<std::int32_t>(label_order.size());
                    label_order.push_back(f);
                }
            } else if (role == ColumnRole::Categorical) {
                auto& codes = cat_code[idx];
                if (!codes.count(f)) {
                    codes[f] = cat_order[idx].size();
                    cat_order[idx].push_back(f);
                }
            } else if (role == ColumnRole::Numeric) {
                const double v = std::stod(f);
                auto it = num_range.find(idx);
                if (it == num_range.end())
                    num_range[idx] = {v, v};
                else {
                    it->second.first = std::min(it->second.first, v);
                    it->second.second = std::max(it->second.second, v);
                }
            }
        }
    }

    std::size_t dim = 0;
    for (const auto& [idx, role] : schema.roles) {
        if (role == ColumnRole::Numeric) dim += 1;
        else if (role == ColumnRole::Categorical) dim += cat_order[idx].size();
    }
    if (dim == 0) throw std::runtime_error("csv: schema yields no feature columns");

    Dataset ds;
    ds.dim = dim;
    ds.num_classes = label_order.size();
    ds.source = path;
    ds.dropped_rows = dropped;
    ds.features.assign(rows.size() * dim, 0.0);
    ds.labels.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& fields = rows[r];
        std::size_t off = 0;
        for (const auto& [idx, role] : schema.roles) {
            const std::string& f = fields[idx];
            if (role == ColumnRole::Label) {
                ds.labels[r] = label_code[f];
            } else if (role == ColumnRole::Numeric) {
                const auto [lo, hi] = num_range[idx];
                const double v = std::stod(f);
                ds.features[r * dim + off] = hi > lo ? (v - lo) / (hi - lo) : 0.0;
                off += 1;
            } else if (role == ColumnRole::Categorical) {
                ds.features[r * dim + off + cat_code[idx][f]] = 1.0;
                off += cat_order[idx].size();
            }
        }
    }
    ds.preprocessing_hash = fnv1a64("csv:minmax01:onehot-first-appearance", ds.content_hash());
    ds.validate();
    return ds;
}

// --------------------------------------------------------------------------
// IDX (big-endian image/label containers).
// --------------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_be32(std::istream& is, const char* what, std::size_t offset) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is)
        throw std::runtime_error(std::string("idx: truncated ") + what + " at byte offset " +
                                 std::to_string(offset));
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

inline void write_be32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace detail

/// Loads an IDX image/label pair. Pixels are scaled from [0,255] to [0,1]
/// and flattened to rows*cols features; ball normalisation is left to the
/// half-split protocol as with load_csv.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("cannot open: " + images_path);
    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("cannot open: " + labels_path);

    const std::uint32_t img_magic = detail::read_be32(imgs, "image magic", 0);
    if (img_magic != 0x00000803u)
        throw std::runtime_error("idx: bad image magic at byte offset 0 in " + images_path);
    const std::uint32_t n = detail::read_be32(imgs, "image count", 4);
    const std::uint32_t rows = detail::read_be32(imgs, "row count", 8);
    const std::uint32_t cols = detail::read_be32(imgs, "column count", 12);

    const std::uint32_t lab_magic = detail::read_be32(labs, "label magic", 0);
    if (lab_magic != 0x00000801u)
        throw std::runtime_error("idx: bad label magic at byte offset 0 in " + labels_path);
    const std::uint32_t n_lab = detail::read_be32(labs, "label count", 4);
    if (n != n_lab) throw std::runtime_error("idx: image/label counts differ");

    Dataset ds;
    ds.dim = static_cast<std::size_t>(rows) * cols;
    ds.source = images_path;
    ds.features.resize(static_cast<std::size_t>(n) * ds.dim);
    ds.labels.resize(n);

    std::vector<unsigned char> buf(ds.dim);
    for (std::uint32_t i = 0; i < n; ++i) {
        imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!imgs)
            throw std::runtime_error("idx: truncated pixel data at byte offset " +
                                     std::to_string(16 + static_cast<std::size_t>(i) * ds.dim));
        for (std::size_t j = 0; j < ds.dim; ++j)
            ds.features[static_cast<std::size_t>(i) * ds.dim + j] = buf[j] / 255.0;
        unsigned char y;
        labs.read(reinterpret_cast<char*>(&y), 1);
        if (!labs)
            throw std::runtime_error("idx: truncated label data at byte offset " +
                                     std::to_string(8 + i));
        ds.labels[i] = y;
    }
    std::int32_t max_label = 0;
    for (std::int32_t y : ds.labels) max_label = std::max(max_label, y);
    ds.num_classes = static_cast<std::size_t>(max_label) + 1;
    if (ds.num_classes < 2) ds.num_classes = 2;
    ds.preprocessing_hash = fnv1a64("idx:scale255", ds.content_hash());
    ds.validate();
    return ds;
}

/// Writes a synthetic IDX pair; used by tests and small pipelines.
inline void write_idx(const std::string& images_path, const std::string& labels_path,
                      std::uint32_t rows, std::uint32_t cols,
                      const std::vector<std::vector<unsigned char>>& images,
                      const std::vector<unsigned char>& labels) {
    if (images.size() != labels.size()) throw std::invalid_argument("idx: count mismatch");
    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("cannot open for write: " + images_path);
    detail::write_be32(imgs, 0x00000803u);
    detail::write_be32(imgs, static_cast<std::uint32_t>(images.size()));
    detail::write_be32(imgs, rows);
    detail::write_be32(imgs, cols);
    for (const auto& img : images) {
        if (img.size() != static_cast<std::size_t>(rows) * cols)
            throw std::invalid_argument("idx: image size mismatch");
        imgs.write(reinterpret_cast<const char*>(img.data()),
                   static_cast<std::streamsize>(img.size()));
    }
    std::ofstream labs(labels_path, std::ios::binary);
    if (!labs) throw std::runtime_error("cannot open for write: " + labels_path);
    detail::write_be32(labs, 0x00000801u);
    detail::write_be32(labs, static_cast<std::uint32_t>(labels.size()));
    labs.write(reinterpret_cast<const char*>(labels.data()),
               static_cast<std::streamsize>(labels.size()));
}

// --------------------------------------------------------------------------
// Unit ball and the half-split protocol.
// --------------------------------------------------------------------------

/// Divides every row by max(1, max row norm of this matrix). Returns the
/// scale that was applied.
inline double normalize_unit_ball(std::vector<double>& features, std::size_t dim) {
    if (dim == 0) throw std::invalid_argument("normalize: zero dimension");
    double max_norm = 0.0;
    for (std::size_t off = 0; off < features.size(); off += dim) {
        double s = 0.0;
        for (std::size_t j = 0; j < dim; ++j) s += features[off + j] * features[off + j];
        max_norm = std::max(max_norm, std::sqrt(s));
    }
    const double scale = std::max(1.0, max_norm);
    if (scale > 1.0)
        for (double& v : features) v /= scale;
    return scale;
}

inline double normalize_unit_ball(Dataset& ds) {
    const double s = normalize_unit_ball(ds.features, ds.dim);
    ds.preprocessing_hash = fnv1a64("ball", ds.preprocessing_hash);
    return s;
}

struct SplitResult {
    Dataset train;
    Dataset eval;
    double scale = 1.0;         // unit-ball scale fitted on the train half
    double eval_max_norm = 0.0; // after scaling; may exceed 1, reported for visibility
};

/// Seeded permutation cut at floor(m/2); the first half trains, the second
/// estimates population risks. The unit-ball scale is fitted on the train
/// half only and reused for the eval half, which may as a result slightly
/// exceed the ball; the max eval norm is reported so that is visible.
inline SplitResult split_halves(const Dataset& ds, std::uint64_t seed) {
    ds.validate();
    const std::size_t m = ds.size();
    Rng rng(derive_seed(seed, "half-split"));
    auto perm = shuffled_indices(m, rng);
    const std::size_t cut = m / 2;

    auto take = [&](std::size_t begin, std::size_t end) {
        Dataset out;
        out.dim = ds.dim;
        out.num_classes = ds.num_classes;
        out.source = ds.source;
        out.preprocessing_hash = ds.preprocessing_hash;
        out.features.reserve((end - begin) * ds.dim);
        out.labels.reserve(end - begin);
        for (std::size_t i = begin; i < end; ++i) {
            auto row = ds.row(perm[i]);
            out.features.insert(out.features.end(), row.begin(), row.end());
            out.labels.push_back(ds.labels[perm[i]]);
        }
        return out;
    };

    SplitResult res;
    res.train = take(0, cut);
    res.eval = take(cut, m);
    res.scale = std::max(1.0, res.train.max_row_norm());
    if (res.scale > 1.0) {
        for (double& v : res.train.features) v /= res.scale;
        for (double& v : res.eval.features) v /= res.scale;
    }
    res.eval_max_norm = res.eval.max_row_norm();
    res.train.preprocessing_hash = fnv1a64("half-split-train", ds.preprocessing_hash);
    res.eval.preprocessing_hash = fnv1a64("half-split-eval", ds.preprocessing_hash);
    return res;
}

// --------------------------------------------------------------------------
// Compact binary dataset container written by `ingest`.
// --------------------------------------------------------------------------

inline void save_dataset(const Dataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    const char magic[4] = {'P', 'B', 'W', 'D'};
    os.write(magic, 4);
    auto put64 = [&](std::uint64_t v) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        os.write(reinterpret_cast<const char*>(b), 8);
    };
    put64(1);  // version
    put64(ds.size());
    put64(ds.dim);
    put64(ds.num_classes);
    put64(ds.preprocessing_hash);
    put64(ds.dropped_rows);
    put64(ds.source.size());
    os.write(ds.source.data(), static_cast<std::streamsize>(ds.source.size()));
    os.write(reinterpret_cast<const char*>(ds.features.data()),
             static_cast<std::streamsize>(ds.features.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(ds.labels.data()),
             static_cast<std::streamsize>(ds.labels.size() * sizeof(std::int32_t)));
    if (!os) throw std::runtime_error("write failed: " + path);
}

inline Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "PBWD")
        throw std::runtime_error("dataset file: bad magic in " + path);
    auto get64 = [&]() {
        unsigned char b[8];
        is.read(reinterpret_cast<char*>(b), 8);
        if (!is) throw std::runtime_error("dataset file: truncated header");
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    };
    if (get64() != 1) throw std::runtime_error("dataset file: unsupported version");
    Dataset ds;
    const std::uint64_t m = get64();
    ds.dim = get64();
    ds.num_classes = get64();
    ds.preprocessing_hash = get64();
    ds.dropped_rows = get64();
    const std::uint64_t src_len = get64();
    ds.source.resize(src_len);
    is.read(ds.source.data(), static_cast<std::streamsize>(src_len));
    ds.features.resize(m * ds.dim);
    is.read(reinterpret_cast<char*>(ds.features.data()),
            static_cast<std::streamsize>(ds.features.size() * sizeof(double)));
    ds.labels.resize(m);
    is.read(reinterpret_cast<char*>(ds.labels.data()),
            static_cast<std::streamsize>(ds.labels.size() * sizeof(std::int32_t)));
    if (!is) throw std::runtime_error("dataset file: truncated payload in " + path);
    ds.validate();
    return ds;
}

/// Seeded subsample without replacement, preserving nothing about order.
inline Dataset subsample(const Dataset& ds, std::size_t count, std::uint64_t seed) {
    ds.validate();
    if (count >= ds.size()) return ds;
    Rng rng(derive_seed(seed, "subsample"));
    auto perm = shuffled_indices(ds.size(), rng);
    Dataset out;
    out.dim = ds.dim;
    out.num_classes = ds.num_classes;
    out.source = ds.source;
    out.dropped_rows = ds.dropped_rows;
    out.features.reserve(count * ds.dim);
    out.labels.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto row = ds.row(perm[i]);
        out.features.insert(out.features.end(), row.begin(), row.end());
        out.labels.push_back(ds.labels[perm[i]]);
    }
    out.preprocessing_hash = fnv1a64("subsample", ds.preprocessing_hash);
    return out;
}

}  // namespace pbw
