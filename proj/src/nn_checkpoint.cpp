#include <cstring>

#include "egocl/io.hpp"
#include "egocl/nn/model.hpp"

namespace egocl::nn {

namespace {
constexpr char kMagic[8] = {'E', 'G', 'O', 'C', 'K', 'P', 'T', '1'};

void append_u32(std::string& s, uint32_t v) {
    s.append(reinterpret_cast<const char*>(&v), 4);
}
void append_u64(std::string& s, uint64_t v) {
    s.append(reinterpret_cast<const char*>(&v), 8);
}
uint32_t read_u32(const std::string& s, size_t& pos) {
    uint32_t v;
    std::memcpy(&v, s.data() + pos, 4);
    pos += 4;
    return v;
}
uint64_t read_u64(const std::string& s, size_t& pos) {
    uint64_t v;
    std::memcpy(&v, s.data() + pos, 8);
    pos += 8;
    return v;
}
}  // namespace

void save_param_blob(const std::filesystem::path& path,
                     const std::vector<std::pair<std::string, Eigen::MatrixXd>>& tensors) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    append_u32(out, 1);  // version
    append_u32(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, m] : tensors) {
        append_u32(out, static_cast<uint32_t>(name.size()));
        out += name;
        append_u64(out, static_cast<uint64_t>(m.rows()));
        append_u64(out, static_cast<uint64_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                double v = m(r, c);
                out.append(reinterpret_cast<const char*>(&v), 8);
            }
    }
    atomic_write_file(path, out);
}

std::vector<std::pair<std::string, Eigen::MatrixXd>> load_param_blob(
    const std::filesystem::path& path) {
    std::string in = read_text_file(path);
    if (in.size() < 16 || std::memcmp(in.data(), kMagic, 8) != 0)
        throw IngestError("bad checkpoint header: " + path.string());
    size_t pos = 8;
    const uint32_t version = read_u32(in, pos);
    if (version != 1)
        throw IngestError("unsupported checkpoint version " + std::to_string(version));
    const uint32_t count = read_u32(in, pos);
    std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;
    tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        if (pos + 4 > in.size()) throw IngestError("truncated checkpoint");
        const uint32_t name_len = read_u32(in, pos);
        if (pos + name_len + 16 > in.size()) throw IngestError("truncated checkpoint");
        std::string name = in.substr(pos, name_len);
        pos += name_len;
        const auto rows = static_cast<Eigen::Index>(read_u64(in, pos));
        const auto cols = static_cast<Eigen::Index>(read_u64(in, pos));
        const size_t bytes = static_cast<size_t>(rows) * static_cast<size_t>(cols) * 8;
        if (pos + bytes > in.size()) throw IngestError("truncated checkpoint");
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) {
                double v;
                std::memcpy(&v, in.data() + pos, 8);
                pos += 8;
                m(r, c) = v;
            }
        tensors.emplace_back(std::move(name), std::move(m));
    }
    return tensors;
}

}  // namespace egocl::nn
