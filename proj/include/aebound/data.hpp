#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "aebound/matrix.hpp"

namespace aebound {

/// Binary samples in {0,1}^M, one per row, with optional integer labels.
class Dataset {
public:
    Dataset(Matrix samples, std::optional<std::vector<int>> labels = std::nullopt);

    const Matrix& samples() const { return samples_; }
    const std::optional<std::vector<int>>& labels() const { return labels_; }
    bool has_labels() const { return labels_.has_value(); }
    std::size_t size() const { return samples_.rows(); }
    std::size_t dim() const { return samples_.cols(); }
    /// Largest L2 norm over samples; at most sqrt(M).
    double max_norm() const { return max_norm_; }
    /// Number of distinct labels, 0 when unlabeled.
    std::size_t num_classes() const;

    Dataset subset(std::span<const std::size_t> indices) const;

private:
    Matrix samples_;
    std::optional<std::vector<int>> labels_;
    double max_norm_ = 0.0;
};

// --- IDX ---------------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// 8-bit images, one image per row of `pixels` (count x rows*cols).
struct ImageSet {
    std::uint32_t count = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::uint8_t> pixels;

    std::size_t pixels_per_image() const { return std::size_t{rows} * cols; }
    std::span<const std::uint8_t> image(std::size_t i) const {
        return std::span(pixels).subspan(i * pixels_per_image(), pixels_per_image());
    }
};

struct LabelSet {
    std::vector<std::uint8_t> labels;
};

using IdxContents = std::variant<ImageSet, LabelSet>;

/// Parses an IDX blob. Errors are DataError with wrong_magic, truncated or
/// malformed (trailing bytes beyond the declared count).
IdxContents parse_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_idx(const ImageSet& images);
std::vector<std::uint8_t> write_idx(const LabelSet& labels);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Loads an IDX image file and, optionally, its label file. A label count
/// different from the image count is rejected with count_mismatch.
struct LabeledImages {
    ImageSet images;
    std::optional<std::vector<int>> labels;
};
LabeledImages load_idx(const std::filesystem::path& images_path,
                       const std::optional<std::filesystem::path>& labels_path);

// --- AEB1 raw container -------------------------------------------------

/// Multi-channel 8-bit images stored planar per image: for image i, channel
/// c, row r, column x the byte sits at ((i*channels + c)*rows + r)*cols + x.
struct RawImages {
    std::uint32_t count = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::uint32_t channels = 0;
    std::vector<std::uint8_t> pixels;
};

/// "AEB1" magic, then count, rows, cols, channels as big-endian u32, then
/// the pixel payload.
RawImages parse_aeb1(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_aeb1(const RawImages& images);

// --- preprocessing ------------------------------------------------------

inline constexpr double kDefaultBinarizeThreshold = 0.5;

/// Entry is 1 iff pixel / 255 >= threshold.
Dataset binarize(const ImageSet& images, double threshold = kDefaultBinarizeThreshold,
                 std::optional<std::vector<int>> labels = std::nullopt);

/// BT.601 luma, 0.299 R + 0.587 G + 0.114 B rounded to nearest.
std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);
ImageSet to_grayscale(const RawImages& rgb);

// --- synthetic clusters -------------------------------------------------

struct ClusteredData {
    Dataset data;
    Matrix prototypes;
    /// Smallest pairwise Hamming distance between prototypes.
    std::size_t min_prototype_hamming = 0;
    /// Lower bound on the L2 distance between points of different clusters:
    /// sqrt(min_prototype_hamming - 2 * flips).
    double guaranteed_margin = 0.0;
};

/// K random binary prototypes in {0,1}^M at pairwise Hamming distance at
/// least `min_hamming` (default and minimum 4*flips + 2); every sample is its
/// prototype with exactly `flips` distinct bits flipped, labeled by cluster.
/// Samples are ordered cluster by cluster.
ClusteredData gen_clustered(std::size_t k, std::size_t m, std::size_t flips, std::size_t per_cluster,
                            std::uint64_t seed, std::optional<std::size_t> min_hamming = std::nullopt);

// --- splits -------------------------------------------------------------

struct SplitSpec {
    std::size_t n_labeled = 0;
    std::size_t m_unlabeled = 0;
    std::size_t n_test = 0;
    std::uint64_t seed = 0;
};

struct Splits {
    std::vector<std::size_t> labeled;
    std::vector<std::size_t> unlabeled;
    std::vector<std::size_t> test;
};

/// Deterministic disjoint index partition. With labels present the labeled
/// part is stratified: classes take turns in a seeded order, so every class
/// is represented once n_labeled >= number of classes.
Splits split(const Dataset& data, const SplitSpec& spec);

}  // namespace aebound
