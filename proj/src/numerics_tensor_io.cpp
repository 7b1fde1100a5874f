#include "mexflow/tensor_io.hpp"

#include <fstream>

#include "mexflow/binary_io.hpp"

namespace mex::nn {

void write_tensor(std::ostream& out, const Tensor& tensor, StorageType type) {
    io::write_magic(out, "MXTN");
    io::write_u8(out, 1);
    io::write_u8(out, static_cast<std::uint8_t>(type));
    io::write_u8(out, static_cast<std::uint8_t>(tensor.rank()));
    for (auto e : tensor.shape()) io::write_u32(out, static_cast<std::uint32_t>(e));
    for (double v : tensor.data()) {
        if (type == StorageType::f32)
            io::write_f32(out, static_cast<float>(v));
        else
            io::write_f64(out, v);
    }
}

Tensor read_tensor(std::istream& in, const std::string& source) {
    io::Reader r(in, source);
    r.expect_magic("MXTN");
    if (const auto version = r.u8(); version != 1) r.fail("unsupported MXTN version " + std::to_string(version));
    const auto dtype = r.u8();
    if (dtype > 1) r.fail("unknown dtype " + std::to_string(dtype));
    const auto rank = r.u8();
    if (rank == 0) r.fail("rank must be positive");
    Shape shape(rank);
    for (auto& e : shape) {
        e = r.u32();
        if (e == 0) r.fail("zero extent");
    }
    std::vector<double> data(shape_volume(shape));
    for (auto& v : data) v = dtype == 0 ? static_cast<double>(r.f32()) : r.f64();
    return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& tensor, StorageType type) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_tensor(out, tensor, type);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Tensor load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_tensor(in, path.string());
}

}  // namespace mex::nn
