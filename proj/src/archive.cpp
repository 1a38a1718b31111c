#include "gradid/archive.hpp"

#include <string>

#include "binary_io.hpp"
#include "gradid/errors.hpp"

namespace gradid {

namespace {
constexpr char kMagic[4] = {'I', 'D', 'S', 'A'};
constexpr std::uint8_t kVersion = 1;
}  // namespace

std::size_t TensorArchive::sample_size() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::size_t TensorArchive::count() const {
    const std::size_t per = sample_size();
    return per == 0 ? 0 : data.size() / per;
}

Tensor TensorArchive::tensor_at(std::size_t i) const {
    const std::size_t per = sample_size();
    std::vector<double> values(data.begin() + static_cast<std::ptrdiff_t>(i * per),
                               data.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    return Tensor(shape, std::move(values));
}

TensorArchive TensorArchive::from_cloud(const PointCloud& cloud) {
    TensorArchive archive;
    archive.shape = {cloud.dim()};
    archive.data = cloud.flat();
    return archive;
}

TensorArchive TensorArchive::from_samples(const std::vector<LabeledSample>& samples) {
    if (samples.empty()) throw ParameterError("cannot archive an empty sample set");
    TensorArchive archive;
    archive.shape = samples.front().input.shape();
    archive.labels.emplace();
    for (const LabeledSample& s : samples) {
        if (s.input.shape() != archive.shape) throw DimensionError("samples in one archive must share a shape");
        archive.data.insert(archive.data.end(), s.input.data().begin(), s.input.data().end());
        archive.labels->push_back(static_cast<std::uint32_t>(s.label));
    }
    return archive;
}

PointCloud TensorArchive::to_cloud() const {
    return PointCloud(sample_size(), data);
}

void save_archive(const std::string& path, const TensorArchive& archive) {
    if (archive.shape.empty()) throw ParameterError("archive shape must be non-empty");
    const std::size_t per = archive.sample_size();
    if (per == 0 || archive.data.size() % per != 0) {
        throw ParameterError("archive payload does not match its shape");
    }
    const std::size_t count = archive.count();
    if (archive.labels && archive.labels->size() != count) {
        throw ParameterError("label count does not match sample count");
    }
    if (archive.flags && archive.flags->size() != count) {
        throw ParameterError("flag count does not match sample count");
    }

    std::string out;
    out.append(kMagic, 4);
    binio::put_u8(out, kVersion);
    binio::put_u32(out, static_cast<std::uint32_t>(count));
    binio::put_u32(out, static_cast<std::uint32_t>(archive.shape.size()));
    for (std::size_t d : archive.shape) binio::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : archive.data) binio::put_f64(out, v);
    binio::put_u8(out, archive.labels ? 1 : 0);
    if (archive.labels) {
        for (std::uint32_t l : *archive.labels) binio::put_u32(out, l);
    }
    binio::put_u8(out, archive.flags ? 1 : 0);
    if (archive.flags) {
        for (std::uint8_t f : *archive.flags) binio::put_u8(out, f);
    }
    binio::write_file(path, out);
}

TensorArchive load_archive(const std::string& path) {
    binio::Reader r(binio::read_file(path), path);
    r.magic(kMagic);
    const std::uint8_t version = r.u8();
    if (version != kVersion) {
        throw FormatError(path + ": unsupported archive version " + std::to_string(version));
    }
    const std::uint32_t count = r.u32();
    const std::uint32_t ndim = r.u32();
    if (ndim == 0) throw FormatError(path + ": empty shape");

    TensorArchive archive;
    archive.shape.resize(ndim);
    std::size_t per = 1;
    for (auto& d : archive.shape) {
        d = r.u32();
        if (d == 0) throw FormatError(path + ": zero shape entry");
        per *= d;
    }
    archive.data.resize(static_cast<std::size_t>(count) * per);
    for (double& v : archive.data) v = r.f64();
    if (r.u8() != 0) {
        archive.labels.emplace(count);
        for (auto& l : *archive.labels) l = r.u32();
    }
    if (r.u8() != 0) {
        archive.flags.emplace(count);
        for (auto& f : *archive.flags) f = r.u8();
    }
    r.expect_end();
    return archive;
}

}  // namespace gradid
