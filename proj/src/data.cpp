#include "aebound/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "aebound/errors.hpp"
#include "aebound/rng.hpp"

namespace aebound {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void check_payload(std::size_t header, std::size_t payload, std::size_t available, const char* what) {
    if (available < header + payload)
        throw DataError(DataErrorCode::truncated, std::string(what) + ": payload truncated, expected " +
                                                      std::to_string(header + payload) + " bytes, got " +
                                                      std::to_string(available));
    if (available > header + payload)
        throw DataError(DataErrorCode::malformed,
                        std::string(what) + ": " + std::to_string(available - header - payload) +
                            " bytes beyond the declared count");
}

}  // namespace

Dataset::Dataset(Matrix samples, std::optional<std::vector<int>> labels)
    : samples_(std::move(samples)), labels_(std::move(labels)) {
    if (samples_.empty()) throw std::invalid_argument("dataset must contain at least one sample");
    for (double v : samples_.values())
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument("dataset entries must be 0 or 1, found " + std::to_string(v));
    if (labels_ && labels_->size() != samples_.rows())
        throw std::invalid_argument("dataset has " + std::to_string(samples_.rows()) + " samples but " +
                                    std::to_string(labels_->size()) + " labels");
    for (std::size_t i = 0; i < samples_.rows(); ++i) max_norm_ = std::max(max_norm_, norm2(samples_.row(i)));
}

std::size_t Dataset::num_classes() const {
    if (!labels_) return 0;
    return std::set<int>(labels_->begin(), labels_->end()).size();
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::optional<std::vector<int>> labels;
    if (labels_) {
        labels.emplace();
        labels->reserve(indices.size());
        for (std::size_t i : indices) labels->push_back(labels_->at(i));
    }
    return Dataset(samples_.select_rows(indices), std::move(labels));
}

IdxContents parse_idx(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 8) throw DataError(DataErrorCode::truncated, "idx: header truncated");
    const std::uint32_t magic = read_be32(bytes, 0);
    const std::uint32_t count = read_be32(bytes, 4);
    if (magic == kIdxLabelMagic) {
        check_payload(8, count, bytes.size(), "idx labels");
        return LabelSet{{bytes.begin() + 8, bytes.end()}};
    }
    if (magic == kIdxImageMagic) {
        if (bytes.size() < 16) throw DataError(DataErrorCode::truncated, "idx: image header truncated");
        ImageSet images;
        images.count = count;
        images.rows = read_be32(bytes, 8);
        images.cols = read_be32(bytes, 12);
        check_payload(16, std::size_t{count} * images.rows * images.cols, bytes.size(), "idx images");
        images.pixels.assign(bytes.begin() + 16, bytes.end());
        return images;
    }
    throw DataError(DataErrorCode::wrong_magic, "idx: unknown magic number " + std::to_string(magic));
}

std::vector<std::uint8_t> write_idx(const ImageSet& images) {
    if (images.pixels.size() != std::size_t{images.count} * images.rows * images.cols)
        throw std::invalid_argument("write_idx: pixel count does not match dimensions");
    std::vector<std::uint8_t> out;
    out.reserve(16 + images.pixels.size());
    append_be32(out, kIdxImageMagic);
    append_be32(out, images.count);
    append_be32(out, images.rows);
    append_be32(out, images.cols);
    out.insert(out.end(), images.pixels.begin(), images.pixels.end());
    return out;
}

std::vector<std::uint8_t> write_idx(const LabelSet& labels) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + labels.labels.size());
    append_be32(out, kIdxLabelMagic);
    append_be32(out, static_cast<std::uint32_t>(labels.labels.size()));
    out.insert(out.end(), labels.labels.begin(), labels.labels.end());
    return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataErrorCode::io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(DataErrorCode::io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

LabeledImages load_idx(const std::filesystem::path& images_path,
                       const std::optional<std::filesystem::path>& labels_path) {
    const auto image_bytes = read_file(images_path);
    auto parsed = parse_idx(image_bytes);
    auto* images = std::get_if<ImageSet>(&parsed);
    if (!images) throw DataError(DataErrorCode::wrong_magic, images_path.string() + " is not an IDX image file");
    LabeledImages out{std::move(*images), std::nullopt};
    if (labels_path) {
        auto lparsed = parse_idx(read_file(*labels_path));
        auto* labels = std::get_if<LabelSet>(&lparsed);
        if (!labels)
            throw DataError(DataErrorCode::wrong_magic, labels_path->string() + " is not an IDX label file");
        if (labels->labels.size() != out.images.count)
            throw DataError(DataErrorCode::count_mismatch,
                            "label file has " + std::to_string(labels->labels.size()) + " entries, image file " +
                                std::to_string(out.images.count));
        out.labels.emplace(labels->labels.begin(), labels->labels.end());
    }
    return out;
}

RawImages parse_aeb1(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, "AEB1"))
        throw DataError(DataErrorCode::wrong_magic, "aeb1: missing AEB1 magic");
    if (bytes.size() < 20) throw DataError(DataErrorCode::truncated, "aeb1: header truncated");
    RawImages raw;
    raw.count = read_be32(bytes, 4);
    raw.rows = read_be32(bytes, 8);
    raw.cols = read_be32(bytes, 12);
    raw.channels = read_be32(bytes, 16);
    check_payload(20, std::size_t{raw.count} * raw.rows * raw.cols * raw.channels, bytes.size(), "aeb1");
    raw.pixels.assign(bytes.begin() + 20, bytes.end());
    return raw;
}

std::vector<std::uint8_t> write_aeb1(const RawImages& images) {
    if (images.pixels.size() != std::size_t{images.count} * images.rows * images.cols * images.channels)
        throw std::invalid_argument("write_aeb1: pixel count does not match dimensions");
    std::vector<std::uint8_t> out{'A', 'E', 'B', '1'};
    append_be32(out, images.count);
    append_be32(out, images.rows);
    append_be32(out, images.cols);
    append_be32(out, images.channels);
    out.insert(out.end(), images.pixels.begin(), images.pixels.end());
    return out;
}

Dataset binarize(const ImageSet& images, double threshold, std::optional<std::vector<int>> labels) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("binarize: threshold must lie in (0,1)");
    const std::size_t m = images.pixels_per_image();
    if (images.count == 0 || m == 0) throw std::invalid_argument("binarize: no pixels");
    Matrix samples(images.count, m);
    for (std::size_t i = 0; i < images.count; ++i) {
        const auto img = images.image(i);
        auto row = samples.row(i);
        for (std::size_t j = 0; j < m; ++j) row[j] = (img[j] / 255.0 >= threshold) ? 1.0 : 0.0;
    }
    return Dataset(std::move(samples), std::move(labels));
}

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const double y = 0.299 * r + 0.587 * g + 0.114 * b;
    return static_cast<std::uint8_t>(std::clamp<long>(std::lround(y), 0, 255));
}

ImageSet to_grayscale(const RawImages& rgb) {
    if (rgb.channels != 3) throw std::invalid_argument("to_grayscale: expected 3 channels, got " +
                                                       std::to_string(rgb.channels));
    ImageSet out;
    out.count = rgb.count;
    out.rows = rgb.rows;
    out.cols = rgb.cols;
    const std::size_t plane = std::size_t{rgb.rows} * rgb.cols;
    out.pixels.resize(std::size_t{rgb.count} * plane);
    for (std::size_t i = 0; i < rgb.count; ++i) {
        const std::uint8_t* base = rgb.pixels.data() + i * 3 * plane;
        for (std::size_t p = 0; p < plane; ++p)
            out.pixels[i * plane + p] = luma(base[p], base[plane + p], base[2 * plane + p]);
    }
    return out;
}

ClusteredData gen_clustered(std::size_t k, std::size_t m, std::size_t flips, std::size_t per_cluster,
                            std::uint64_t seed, std::optional<std::size_t> min_hamming) {
    if (k < 2) throw std::invalid_argument("gen_clustered: need at least 2 clusters");
    if (per_cluster == 0) throw std::invalid_argument("gen_clustered: per_cluster must be positive");
    const std::size_t floor = 4 * flips + 2;
    const std::size_t h = min_hamming.value_or(floor);
    if (h < floor)
        throw std::invalid_argument("gen_clustered: min_hamming " + std::to_string(h) + " below 4*flips+2 = " +
                                    std::to_string(floor));
    if (h > m || flips > m)
        throw std::invalid_argument("gen_clustered: infeasible, Hamming floor " + std::to_string(h) +
                                    " exceeds dimension " + std::to_string(m));

    Rng rng(seed);
    constexpr std::size_t kAttempts = 20000;
    std::vector<std::vector<std::uint8_t>> protos;
    for (std::size_t c = 0; c < k; ++c) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < kAttempts && !placed; ++attempt) {
            std::vector<std::uint8_t> cand(m);
            for (auto& bit : cand) bit = static_cast<std::uint8_t>(rng.next() >> 63);
            placed = std::all_of(protos.begin(), protos.end(), [&](const auto& p) {
                std::size_t dist = 0;
                for (std::size_t j = 0; j < m; ++j) dist += p[j] != cand[j];
                return dist >= h;
            });
            if (placed) protos.push_back(std::move(cand));
        }
        if (!placed)
            throw std::invalid_argument("gen_clustered: infeasible, could not place " + std::to_string(k) +
                                        " prototypes at Hamming distance " + std::to_string(h) + " in " +
                                        std::to_string(m) + " bits");
    }

    std::size_t min_h = m;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b) {
            std::size_t dist = 0;
            for (std::size_t j = 0; j < m; ++j) dist += protos[a][j] != protos[b][j];
            min_h = std::min(min_h, dist);
        }

    Matrix prototypes(k, m);
    Matrix samples(k * per_cluster, m);
    std::vector<int> labels(k * per_cluster);
    std::vector<std::size_t> positions(m);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t j = 0; j < m; ++j) prototypes(c, j) = protos[c][j];
        for (std::size_t s = 0; s < per_cluster; ++s) {
            const std::size_t row = c * per_cluster + s;
            auto out = samples.row(row);
            for (std::size_t j = 0; j < m; ++j) out[j] = protos[c][j];
            // Partial Fisher-Yates picks `flips` distinct positions.
            std::iota(positions.begin(), positions.end(), std::size_t{0});
            for (std::size_t f = 0; f < flips; ++f) {
                std::swap(positions[f], positions[f + rng.index(m - f)]);
                out[positions[f]] = 1.0 - out[positions[f]];
            }
            labels[row] = static_cast<int>(c);
        }
    }
    ClusteredData out{Dataset(std::move(samples), std::move(labels)), std::move(prototypes), min_h,
                      std::sqrt(static_cast<double>(min_h - 2 * flips))};
    return out;
}

Splits split(const Dataset& data, const SplitSpec& spec) {
    const std::size_t total = spec.n_labeled + spec.m_unlabeled + spec.n_test;
    if (total > data.size())
        throw std::invalid_argument("split: requested " + std::to_string(total) + " samples, dataset has " +
                                    std::to_string(data.size()));
    Rng rng(spec.seed);
    Splits out;
    std::vector<char> taken(data.size(), 0);

    if (data.has_labels() && spec.n_labeled > 0) {
        std::map<int, std::vector<std::size_t>> by_class;
        for (std::size_t i = 0; i < data.size(); ++i) by_class[(*data.labels())[i]].push_back(i);
        std::vector<std::vector<std::size_t>> pools;
        for (auto& [label, members] : by_class) {
            rng.shuffle(members);
            pools.push_back(std::move(members));
        }
        rng.shuffle(pools);
        std::vector<std::size_t> cursor(pools.size(), 0);
        while (out.labeled.size() < spec.n_labeled) {
            for (std::size_t c = 0; c < pools.size() && out.labeled.size() < spec.n_labeled; ++c) {
                if (cursor[c] < pools[c].size()) {
                    const std::size_t idx = pools[c][cursor[c]++];
                    out.labeled.push_back(idx);
                    taken[idx] = 1;
                }
            }
        }
    }

    std::vector<std::size_t> rest;
    rest.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        if (!taken[i]) rest.push_back(i);
    rng.shuffle(rest);
    std::size_t pos = 0;
    while (out.labeled.size() < spec.n_labeled) out.labeled.push_back(rest[pos++]);
    out.unlabeled.assign(rest.begin() + pos, rest.begin() + pos + spec.m_unlabeled);
    pos += spec.m_unlabeled;
    out.test.assign(rest.begin() + pos, rest.begin() + pos + spec.n_test);
    return out;
}

}  // namespace aebound
