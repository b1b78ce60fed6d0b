#pragma once

// GlyphCount task: images with a handful of 5x5 glyphs (cross, square,
// diamond), a query shape, and an exact-count answer. The reward is binary:
// 1.0 iff the token sequence is a well-formed bracketed answer whose value
// equals the true count of the queried shape.

#include "glyphrl/raster.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace glyphrl {

// Token vocabulary. Digits map to their own values so parse code can use
// the token id directly.
inline constexpr int kTokenD0 = 0;
inline constexpr int kTokenD9 = 9;
inline constexpr int kTokenOpen = 10;
inline constexpr int kTokenClose = 11;
inline constexpr int kTokenEos = 12;
inline constexpr int kVocabSize = 13;

inline constexpr int kGlyphSize = 5;
inline constexpr int kGlyphShapeCount = 3;

const char* token_name(int token);

// 5x5 bitmap for shape index 0 (cross), 1 (square), 2 (diamond).
// Row-major, values 0/1.
const unsigned char* glyph_bitmap(int shape);

struct TaskSpec {
    int grid = 32;
    int shapes = 3;
    int max_per_shape = 5;
    int max_len = 6;

    void validate() const;
};

struct TaskInstance {
    Raster image;
    int query_shape = 0;
    int truth = 0;
    std::uint64_t seed = 0;
};

// Draws per-shape counts uniformly from [0, max_per_shape], places glyphs by
// rejection sampling (non-overlapping bounding boxes), then picks the query
// shape uniformly. Throws std::runtime_error if a glyph cannot be placed
// after 1000 attempts.
TaskInstance sample_instance(const TaskSpec& spec, std::uint64_t rng_seed);

// Accepts exactly OPEN, one or more digits, CLOSE, EOS with nothing after
// EOS; digits concatenate base-10 (leading zeros allowed). Anything else is
// std::nullopt.
std::optional<int> parse_answer(const std::vector<int>& tokens);

// 1.0 iff the parsed answer equals the instance truth. Always judged against
// the clean instance; distorted rollouts get no special treatment.
double reward(const TaskInstance& instance, const std::vector<int>& tokens);

}  // namespace glyphrl
