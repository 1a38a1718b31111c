#include "gradid/checkpoint.hpp"

#include "binary_io.hpp"

namespace gradid {

namespace {
constexpr char kMagic[4] = {'I', 'D', 'S', 'N'};
constexpr std::uint8_t kVersion = 1;
}  // namespace

void save_checkpoint(const std::string& path, const Network& net) {
    std::string out;
    out.append(kMagic, 4);
    binio::put_u8(out, kVersion);
    const auto& layers = net.layers();
    binio::put_u32(out, static_cast<std::uint32_t>(layers.size()));
    binio::put_u32(out, static_cast<std::uint32_t>(layers.front().in_dim));
    for (const DenseLayer& l : layers) binio::put_u32(out, static_cast<std::uint32_t>(l.out_dim));
    for (const DenseLayer& l : layers) {
        for (double w : l.weights) binio::put_f64(out, w);
        for (double b : l.biases) binio::put_f64(out, b);
    }
    binio::write_file(path, out);
}

Network load_checkpoint(const std::string& path) {
    binio::Reader r(binio::read_file(path), path);
    r.magic(kMagic);
    const std::uint8_t version = r.u8();
    if (version != kVersion) {
        throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t count = r.u32();
    if (count == 0) throw FormatError(path + ": zero layers");
    std::vector<std::size_t> dims(count + 1);
    for (auto& d : dims) d = r.u32();

    std::vector<DenseLayer> layers(count);
    for (std::uint32_t l = 0; l < count; ++l) {
        layers[l].in_dim = dims[l];
        layers[l].out_dim = dims[l + 1];
        layers[l].activation = (l + 1 == count) ? Activation::identity : Activation::relu;
        layers[l].weights.resize(dims[l] * dims[l + 1]);
        layers[l].biases.resize(dims[l + 1]);
    }
    for (auto& layer : layers) {
        for (double& w : layer.weights) w = r.f64();
        for (double& b : layer.biases) b = r.f64();
    }
    r.expect_end();
    return Network(std::move(layers));
}

}  // namespace gradid
