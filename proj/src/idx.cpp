#include "gradid/idx.hpp"

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "gradid/errors.hpp"

namespace gradid {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

class BigEndianReader {
public:
    BigEndianReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open " + path);
    }

    std::uint32_t u32() {
        unsigned char b[4];
        read(b, 4);
        return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
               std::uint32_t(b[3]);
    }

    void read(unsigned char* out, std::size_t n) {
        in_.read(reinterpret_cast<char*>(out), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw FormatError(path_ + ": truncated file");
        }
    }

    void expect_end() {
        char c;
        if (in_.read(&c, 1)) throw FormatError(path_ + ": trailing bytes after payload");
    }

private:
    std::string path_;
    std::ifstream in_;
};

void put_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    BigEndianReader images(images_path);
    const std::uint32_t image_magic = images.u32();
    if (image_magic != kImageMagic) {
        throw FormatError(images_path + ": bad magic " + std::to_string(image_magic) + ", expected " +
                          std::to_string(kImageMagic));
    }
    const std::uint32_t image_count = images.u32();
    const std::uint32_t rows = images.u32();
    const std::uint32_t cols = images.u32();
    if (rows == 0 || cols == 0) throw FormatError(images_path + ": zero image dimensions");

    BigEndianReader labels(labels_path);
    const std::uint32_t label_magic = labels.u32();
    if (label_magic != kLabelMagic) {
        throw FormatError(labels_path + ": bad magic " + std::to_string(label_magic) + ", expected " +
                          std::to_string(kLabelMagic));
    }
    const std::uint32_t label_count = labels.u32();
    if (label_count != image_count) {
        throw FormatError("image count " + std::to_string(image_count) + " does not match label count " +
                          std::to_string(label_count));
    }

    Dataset ds;
    ds.source = Dataset::Source::idx_file;
    ds.inputs.reserve(image_count);
    ds.labels.reserve(image_count);

    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> raw(pixels);
    int max_label = 0;
    for (std::uint32_t i = 0; i < image_count; ++i) {
        images.read(raw.data(), pixels);
        std::vector<double> values(pixels);
        for (std::size_t p = 0; p < pixels; ++p) values[p] = static_cast<double>(raw[p]) / 255.0;
        ds.inputs.emplace_back(std::vector<std::size_t>{rows, cols}, std::move(values));
        unsigned char label;
        labels.read(&label, 1);
        ds.labels.push_back(static_cast<int>(label));
        max_label = std::max(max_label, static_cast<int>(label));
    }
    images.expect_end();
    labels.expect_end();

    ds.num_classes = static_cast<std::size_t>(std::max(max_label + 1, 10));
    ds.validate();
    return ds;
}

void write_idx(const std::string& images_path, const std::string& labels_path, const Dataset& ds) {
    ds.validate();
    if (ds.size() == 0) throw ParameterError("cannot write an empty IDX pair");
    const auto& shape = ds.inputs.front().shape();
    if (shape.size() != 2) throw ParameterError("IDX images must be rank-2 tensors");

    std::ofstream images(images_path, std::ios::binary | std::ios::trunc);
    if (!images) throw IoError("cannot open " + images_path + " for writing");
    put_be32(images, kImageMagic);
    put_be32(images, static_cast<std::uint32_t>(ds.size()));
    put_be32(images, static_cast<std::uint32_t>(shape[0]));
    put_be32(images, static_cast<std::uint32_t>(shape[1]));
    for (const Tensor& t : ds.inputs) {
        if (t.shape() != shape) throw DimensionError("IDX images must share one shape");
        for (double v : t.data()) {
            const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
            images.write(reinterpret_cast<const char*>(&byte), 1);
        }
    }
    if (!images) throw IoError("write failed on " + images_path);

    std::ofstream labels(labels_path, std::ios::binary | std::ios::trunc);
    if (!labels) throw IoError("cannot open " + labels_path + " for writing");
    put_be32(labels, kLabelMagic);
    put_be32(labels, static_cast<std::uint32_t>(ds.size()));
    for (int l : ds.labels) {
        const auto byte = static_cast<unsigned char>(l);
        labels.write(reinterpret_cast<const char*>(&byte), 1);
    }
    if (!labels) throw IoError("write failed on " + labels_path);
}

}  // namespace gradid
