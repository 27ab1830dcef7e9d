#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ffc/common.hpp"
#include "ffc/models.hpp"

namespace ffc {

struct BlockRecord {
    std::int64_t offset = 0;
    int class_id = 0;
    std::string class_name;
    double probability = 0.0;
};

// Partition an image into consecutive blocks (offset 0, stride = fragment
// size) and classify each; output ordered by offset. The record probability
// is the softmax maximum.
template <typename T>
std::vector<BlockRecord> classify_image(ModelGraph<T>& model, std::span<const std::uint8_t> image,
                                        const std::vector<std::string>& class_names, std::int64_t batch_size = 64) {
    const std::int64_t frag = model.config.fragment_size;
    const std::int64_t blocks = std::int64_t(image.size()) / frag;
    if (blocks < 1)
        throw DataError("classify_image: image of " + std::to_string(image.size()) +
                        " bytes holds no full " + std::to_string(frag) + "-byte block");
    std::vector<BlockRecord> out;
    out.reserve(std::size_t(blocks));
    for (std::int64_t start = 0; start < blocks; start += batch_size) {
        const std::int64_t n = std::min(batch_size, blocks - start);
        ByteBatch bb(n, frag);
        for (std::int64_t b = 0; b < n; ++b) {
            auto src = image.subspan(std::size_t((start + b) * frag), std::size_t(frag));
            std::copy(src.begin(), src.end(), bb.row(b).begin());
        }
        Tensor<T> probs = softmax_probs(model.forward(bb, Mode::eval));
        const T* pp = probs.data().data();
        const std::int64_t K = probs.dim(1);
        for (std::int64_t b = 0; b < n; ++b) {
            const T* row = pp + b * K;
            std::int64_t best = 0;
            for (std::int64_t k = 1; k < K; ++k)
                if (row[k] > row[best]) best = k;
            BlockRecord rec;
            rec.offset = (start + b) * frag;
            rec.class_id = int(best);
            rec.class_name = std::size_t(best) < class_names.size() ? class_names[std::size_t(best)]
                                                                    : "class" + std::to_string(best);
            rec.probability = double(row[best]);
            out.push_back(std::move(rec));
        }
    }
    return out;
}

}  // namespace ffc
