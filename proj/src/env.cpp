#include "glyphrl/env.hpp"

#include "glyphrl/rng.hpp"

#include <stdexcept>
#include <string>

namespace glyphrl {

namespace {

constexpr unsigned char kCross[kGlyphSize * kGlyphSize] = {
    0, 0, 1, 0, 0,
    0, 0, 1, 0, 0,
    1, 1, 1, 1, 1,
    0, 0, 1, 0, 0,
    0, 0, 1, 0, 0,
};

constexpr unsigned char kSquare[kGlyphSize * kGlyphSize] = {
    1, 1, 1, 1, 1,
    1, 1, 1, 1, 1,
    1, 1, 1, 1, 1,
    1, 1, 1, 1, 1,
    1, 1, 1, 1, 1,
};

constexpr unsigned char kDiamond[kGlyphSize * kGlyphSize] = {
    0, 0, 1, 0, 0,
    0, 1, 1, 1, 0,
    1, 1, 1, 1, 1,
    0, 1, 1, 1, 0,
    0, 0, 1, 0, 0,
};

constexpr int kPlacementAttempts = 1000;

}  // namespace

const char* token_name(int token) {
    static const char* names[kVocabSize] = {
        "D0", "D1", "D2", "D3", "D4", "D5", "D6", "D7", "D8", "D9",
        "OPEN", "CLOSE", "EOS",
    };
    if (token < 0 || token >= kVocabSize) return "?";
    return names[token];
}

const unsigned char* glyph_bitmap(int shape) {
    switch (shape) {
        case 0: return kCross;
        case 1: return kSquare;
        case 2: return kDiamond;
        default:
            throw std::invalid_argument("glyph_bitmap: shape index " +
                                        std::to_string(shape) + " out of range");
    }
}

void TaskSpec::validate() const {
    if (grid < 16) throw std::invalid_argument("TaskSpec: grid must be >= 16");
    if (shapes < 2 || shapes > kGlyphShapeCount)
        throw std::invalid_argument("TaskSpec: shapes must be 2 or 3");
    if (max_per_shape < 0)
        throw std::invalid_argument("TaskSpec: max_per_shape must be >= 0");
    if (max_len < 4)
        throw std::invalid_argument("TaskSpec: max_len must be >= 4");
}

TaskInstance sample_instance(const TaskSpec& spec, std::uint64_t rng_seed) {
    spec.validate();
    Rng rng(derive_seed(rng_seed, seed_tag::kInstance));

    TaskInstance inst;
    inst.seed = rng_seed;
    inst.image = Raster(spec.grid, spec.grid);

    std::vector<int> counts(spec.shapes);
    for (int s = 0; s < spec.shapes; ++s)
        counts[s] = static_cast<int>(rng.uniform_int(spec.max_per_shape + 1));

    // Occupancy marks whole bounding boxes, so placed glyphs never touch.
    std::vector<char> occupied(inst.image.size(), 0);
    const int span = spec.grid - kGlyphSize + 1;
    for (int s = 0; s < spec.shapes; ++s) {
        const unsigned char* bitmap = glyph_bitmap(s);
        for (int g = 0; g < counts[s]; ++g) {
            int attempts = 0;
            for (;;) {
                if (++attempts > kPlacementAttempts)
                    throw std::runtime_error(
                        "sample_instance: glyph placement failed after 1000 "
                        "attempts; spec too dense");
                const int row = static_cast<int>(rng.uniform_int(span));
                const int col = static_cast<int>(rng.uniform_int(span));
                bool clash = false;
                for (int r = row; r < row + kGlyphSize && !clash; ++r)
                    for (int c = col; c < col + kGlyphSize; ++c)
                        if (occupied[static_cast<std::size_t>(r) * spec.grid + c]) {
                            clash = true;
                            break;
                        }
                if (clash) continue;
                for (int r = 0; r < kGlyphSize; ++r)
                    for (int c = 0; c < kGlyphSize; ++c) {
                        const std::size_t at =
                            static_cast<std::size_t>(row + r) * spec.grid + (col + c);
                        occupied[at] = 1;
                        if (bitmap[r * kGlyphSize + c])
                            inst.image.pixels[at] = 1.0;
                    }
                break;
            }
        }
    }

    inst.query_shape = static_cast<int>(rng.uniform_int(spec.shapes));
    inst.truth = counts[inst.query_shape];
    return inst;
}

std::optional<int> parse_answer(const std::vector<int>& tokens) {
    if (tokens.size() < 4) return std::nullopt;
    if (tokens.front() != kTokenOpen) return std::nullopt;
    if (tokens.back() != kTokenEos) return std::nullopt;
    if (tokens[tokens.size() - 2] != kTokenClose) return std::nullopt;
    const std::size_t digits = tokens.size() - 3;
    if (digits == 0 || digits > 9) return std::nullopt;
    long long value = 0;
    for (std::size_t i = 1; i <= digits; ++i) {
        const int t = tokens[i];
        if (t < kTokenD0 || t > kTokenD9) return std::nullopt;
        value = value * 10 + t;
    }
    return static_cast<int>(value);
}

double reward(const TaskInstance& instance, const std::vector<int>& tokens) {
    const auto parsed = parse_answer(tokens);
    return (parsed && *parsed == instance.truth) ? 1.0 : 0.0;
}

}  // namespace glyphrl
