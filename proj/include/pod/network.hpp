#pragma once

#include "pod/image.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace pod {

/// Per-cell head layout: objectness logit, two class logits, four box regressors.
namespace head {
inline constexpr int objectness = 0;
inline constexpr int class_logit = 1; // + class id
inline constexpr int box_x = 3;
inline constexpr int box_y = 4;
inline constexpr int box_w = 5;
inline constexpr int box_h = 6;
inline constexpr int channels = 7;
inline constexpr int num_classes = 2;
} // namespace head

struct ConvSpec
{
    int in_channels = 1;
    int out_channels = 1;
    int kernel = 3;
    int stride = 1;
    int padding = 1;
    bool activation = true; ///< SiLU after the convolution

    bool operator==(const ConvSpec&) const = default;
};

struct Architecture
{
    int input_size = 128;
    int grid_size = 8;
    std::vector<ConvSpec> layers;

    /// Stride-2 3x3 SiLU blocks down to the grid, one stride-1 3x3 refinement block and a
    /// 1x1 linear head. `widths` gives the channel count per downsampling block; the last
    /// entry is repeated when there are more blocks than widths.
    static Architecture toy(int input_size = 128, int grid_size = 8, std::vector<int> widths = {16, 32, 32, 64});

    std::size_t parameter_count() const;
    bool operator==(const Architecture&) const = default;
};

void validate(const Architecture& arch);

/// Parameters theta of the detector, flattened layer by layer as [W (out x k*k*in), b (out)].
/// Weight columns are ordered (ky, kx, in_channel).
/// Aligned storage keeps Eigen's vectorized reductions in a fixed order, so results do not
/// depend on where the buffer lands in memory.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

struct DetectorModel
{
    Architecture arch;
    ParamVector params;
};

DetectorModel init_model(const Architecture& arch, std::uint64_t seed);

using Matrix = Eigen::MatrixXd;

/// Activation caches for one forward/backward pass. Not shared between threads.
struct Workspace
{
    struct Layer
    {
        int in_h = 0, in_w = 0, out_h = 0, out_w = 0;
        Matrix cols; ///< im2col of the layer input
        Matrix z;    ///< pre-activation
        Matrix a;    ///< output
    };
    std::vector<Layer> layers;
    Matrix input;
};

/// Runs the network on an image of exactly input_size x input_size. Returns the raw head
/// outputs as a (channels x grid*grid) matrix; column index = row * grid + col.
const Matrix& forward(const DetectorModel& model, const Image& image, Workspace& ws);

/// Backpropagates `d_head` through the cached forward pass. Parameter gradients are
/// accumulated into `param_grad` unless it is empty; the input gradient (1 x H*W) is written
/// to `d_input` when non-null.
void backward(const DetectorModel& model, Workspace& ws, const Matrix& d_head, std::span<double> param_grad,
              Matrix* d_input);

/// Returns the image unchanged when it already matches the model input, else a bilinear resample.
Image to_model_input(const DetectorModel& model, const Image& image);

} // namespace pod
