#include "spikemem/spike_tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace spikemem {

SpikeTensor SpikeTensor::zeros(std::size_t t, std::size_t c, std::size_t h, std::size_t w) {
    return {Tensor(Shape{t, c, h, w}), -1};
}

double& SpikeTensor::at(std::size_t t, std::size_t c, std::size_t y, std::size_t x) {
    return data[((t * channels() + c) * height() + y) * width() + x];
}

double SpikeTensor::at(std::size_t t, std::size_t c, std::size_t y, std::size_t x) const {
    return data[((t * channels() + c) * height() + y) * width() + x];
}

std::size_t SpikeTensor::spike_count() const {
    return static_cast<std::size_t>(std::count(data.storage().begin(), data.storage().end(), 1.0));
}

void SpikeTensor::validate() const {
    if (data.rank() != 4) throw ShapeError("spike_tensor", data.shape(), Shape{0, 0, 0, 0});
    for (double v : data.values()) {
        if (v != 0.0 && v != 1.0) throw std::invalid_argument("spike_tensor: entries must be 0 or 1");
    }
}

Tensor gather_timestep(std::span<const SpikeTensor> batch, std::size_t t) {
    if (batch.empty()) throw std::invalid_argument("gather_timestep: empty batch");
    const auto& first = batch.front();
    const std::size_t frame = first.channels() * first.height() * first.width();
    Tensor out(Shape{batch.size(), first.channels(), first.height(), first.width()});
    for (std::size_t b = 0; b < batch.size(); ++b) {
        if (batch[b].data.shape() != first.data.shape()) {
            throw ShapeError("gather_timestep", first.data.shape(), batch[b].data.shape());
        }
        const double* src = batch[b].data.data() + t * frame;
        std::copy(src, src + frame, out.data() + b * frame);
    }
    return out;
}

}  // namespace spikemem
