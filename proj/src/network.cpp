#include "pod/network.hpp"

#include "pod/errors.hpp"
#include "pod/rng.hpp"

#include <cmath>

namespace pod {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::size_t weight_count(const ConvSpec& s)
{
    return static_cast<std::size_t>(s.out_channels) * s.in_channels * s.kernel * s.kernel;
}

void im2col(const Matrix& in, int h, int w, const ConvSpec& s, int oh, int ow, Matrix& cols)
{
    const int c = s.in_channels;
    cols.setZero(static_cast<Eigen::Index>(s.kernel) * s.kernel * c, static_cast<Eigen::Index>(oh) * ow);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const Eigen::Index p = static_cast<Eigen::Index>(oy) * ow + ox;
            for (int ky = 0; ky < s.kernel; ++ky) {
                const int iy = oy * s.stride - s.padding + ky;
                if (iy < 0 || iy >= h)
                    continue;
                for (int kx = 0; kx < s.kernel; ++kx) {
                    const int ix = ox * s.stride - s.padding + kx;
                    if (ix < 0 || ix >= w)
                        continue;
                    cols.block(static_cast<Eigen::Index>(ky * s.kernel + kx) * c, p, c, 1) =
                        in.col(static_cast<Eigen::Index>(iy) * w + ix);
                }
            }
        }
    }
}

void col2im(const Matrix& dcols, int h, int w, const ConvSpec& s, int oh, int ow, Matrix& din)
{
    const int c = s.in_channels;
    din.setZero(c, static_cast<Eigen::Index>(h) * w);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const Eigen::Index p = static_cast<Eigen::Index>(oy) * ow + ox;
            for (int ky = 0; ky < s.kernel; ++ky) {
                const int iy = oy * s.stride - s.padding + ky;
                if (iy < 0 || iy >= h)
                    continue;
                for (int kx = 0; kx < s.kernel; ++kx) {
                    const int ix = ox * s.stride - s.padding + kx;
                    if (ix < 0 || ix >= w)
                        continue;
                    din.col(static_cast<Eigen::Index>(iy) * w + ix) +=
                        dcols.block(static_cast<Eigen::Index>(ky * s.kernel + kx) * c, p, c, 1);
                }
            }
        }
    }
}

int out_extent(int in, const ConvSpec& s) { return (in + 2 * s.padding - s.kernel) / s.stride + 1; }

} // namespace

Architecture Architecture::toy(int input_size, int grid_size, std::vector<int> widths)
{
    if (grid_size < 1 || input_size < grid_size || input_size % grid_size != 0)
        throw ContractError("input size must be a multiple of the grid size");
    int ratio = input_size / grid_size;
    int blocks = 0;
    while (ratio > 1) {
        if (ratio % 2 != 0)
            throw ContractError("input/grid ratio must be a power of two");
        ratio /= 2;
        ++blocks;
    }
    if (widths.empty())
        throw ContractError("at least one channel width is required");

    Architecture arch;
    arch.input_size = input_size;
    arch.grid_size = grid_size;
    int in = 1;
    for (int i = 0; i < blocks; ++i) {
        const int out = widths[std::min<std::size_t>(i, widths.size() - 1)];
        arch.layers.push_back({in, out, 3, 2, 1, true});
        in = out;
    }
    arch.layers.push_back({in, in, 3, 1, 1, true});
    arch.layers.push_back({in, head::channels, 1, 1, 0, false});
    return arch;
}

std::size_t Architecture::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& l : layers)
        n += weight_count(l) + l.out_channels;
    return n;
}

void validate(const Architecture& arch)
{
    if (arch.layers.empty())
        throw ContractError("architecture has no layers");
    if (arch.layers.front().in_channels != 1)
        throw ContractError("first layer must take one input channel");
    if (arch.layers.back().out_channels != head::channels)
        throw ContractError("last layer must produce the detection head channels");
    int extent = arch.input_size;
    for (std::size_t i = 0; i < arch.layers.size(); ++i) {
        const auto& l = arch.layers[i];
        if (l.kernel < 1 || l.stride < 1 || l.padding < 0 || l.in_channels < 1 || l.out_channels < 1)
            throw ContractError("invalid layer spec");
        if (i > 0 && l.in_channels != arch.layers[i - 1].out_channels)
            throw ContractError("layer channel counts do not chain");
        extent = out_extent(extent, l);
    }
    if (extent != arch.grid_size)
        throw ContractError("architecture output extent does not match grid size");
}

DetectorModel init_model(const Architecture& arch, std::uint64_t seed)
{
    validate(arch);
    DetectorModel model{arch, ParamVector(arch.parameter_count(), 0.0)};
    Rng rng = make_rng(seed, "init");
    std::size_t off = 0;
    for (std::size_t li = 0; li < arch.layers.size(); ++li) {
        const auto& l = arch.layers[li];
        const std::size_t nw = weight_count(l);
        const double fan_in = static_cast<double>(l.in_channels) * l.kernel * l.kernel;
        const double bound = (l.activation ? std::sqrt(6.0 / fan_in) : std::sqrt(1.0 / fan_in));
        for (std::size_t i = 0; i < nw; ++i)
            model.params[off + i] = (2 * uniform01(rng) - 1) * bound;
        off += nw;
        if (li + 1 == arch.layers.size())
            model.params[off + head::objectness] = -4.0; // low prior objectness
        off += l.out_channels;
    }
    return model;
}

const Matrix& forward(const DetectorModel& model, const Image& image, Workspace& ws)
{
    const auto& arch = model.arch;
    if (image.height() != arch.input_size || image.width() != arch.input_size)
        throw ContractError("image does not match the model input size");
    ws.layers.resize(arch.layers.size());
    ws.input = Eigen::Map<const Matrix>(image.pixels().data(), 1, static_cast<Eigen::Index>(image.pixels().size()));

    const Matrix* in = &ws.input;
    int h = arch.input_size, w = arch.input_size;
    std::size_t off = 0;
    for (std::size_t li = 0; li < arch.layers.size(); ++li) {
        const auto& s = arch.layers[li];
        auto& L = ws.layers[li];
        L.in_h = h;
        L.in_w = w;
        L.out_h = out_extent(h, s);
        L.out_w = out_extent(w, s);
        im2col(*in, h, w, s, L.out_h, L.out_w, L.cols);

        const auto k = static_cast<Eigen::Index>(s.kernel) * s.kernel * s.in_channels;
        Eigen::Map<const RowMatrix> W(model.params.data() + off, s.out_channels, k);
        off += weight_count(s);
        Eigen::Map<const Eigen::VectorXd> b(model.params.data() + off, s.out_channels);
        off += s.out_channels;

        L.z.noalias() = W * L.cols;
        L.z.colwise() += b;
        if (s.activation)
            L.a = L.z.unaryExpr([](double x) { return x * sigmoid(x); });
        else
            L.a = L.z;
        in = &L.a;
        h = L.out_h;
        w = L.out_w;
    }
    return ws.layers.back().a;
}

void backward(const DetectorModel& model, Workspace& ws, const Matrix& d_head, std::span<double> param_grad,
              Matrix* d_input)
{
    const auto& arch = model.arch;
    if (!param_grad.empty() && param_grad.size() != model.params.size())
        throw ContractError("gradient buffer size mismatch");

    std::vector<std::size_t> offsets(arch.layers.size());
    std::size_t off = 0;
    for (std::size_t li = 0; li < arch.layers.size(); ++li) {
        offsets[li] = off;
        off += weight_count(arch.layers[li]) + arch.layers[li].out_channels;
    }

    Matrix d_out = d_head;
    Matrix d_cols, d_in;
    for (std::size_t li = arch.layers.size(); li-- > 0;) {
        const auto& s = arch.layers[li];
        auto& L = ws.layers[li];
        if (s.activation) {
            d_out = d_out.binaryExpr(L.z, [](double g, double x) {
                const double sg = sigmoid(x);
                return g * (sg + x * sg * (1 - sg));
            });
        }
        const auto k = static_cast<Eigen::Index>(s.kernel) * s.kernel * s.in_channels;
        if (!param_grad.empty()) {
            Eigen::Map<RowMatrix> dW(param_grad.data() + offsets[li], s.out_channels, k);
            Eigen::Map<Eigen::VectorXd> db(param_grad.data() + offsets[li] + weight_count(s), s.out_channels);
            dW.noalias() += d_out * L.cols.transpose();
            db += d_out.rowwise().sum();
        }
        if (li == 0 && d_input == nullptr)
            break;
        Eigen::Map<const RowMatrix> W(model.params.data() + offsets[li], s.out_channels, k);
        d_cols.noalias() = W.transpose() * d_out;
        col2im(d_cols, L.in_h, L.in_w, s, L.out_h, L.out_w, d_in);
        d_out.swap(d_in);
    }
    if (d_input)
        *d_input = d_out;
}

Image to_model_input(const DetectorModel& model, const Image& image)
{
    return resize_bilinear(image, model.arch.input_size, model.arch.input_size);
}

} // namespace pod
