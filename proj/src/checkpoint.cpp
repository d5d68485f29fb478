#include "tbn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tbn/error.hpp"

namespace tbn {

namespace {

constexpr char kMagic[8] = {'T', 'B', 'N', 'C', 'K', 'P', 'T', '\0'};

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    template <typename U>
    void le(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& in, std::string source) : in_(in), source_(std::move(source)) {}

    const std::uint8_t* take(std::size_t n) {
        if (n > in_.size() - pos_) throw IoError(source_, "truncated checkpoint");
        const std::uint8_t* p = in_.data() + pos_;
        pos_ += n;
        return p;
    }
    template <typename U>
    U le() {
        const std::uint8_t* p = take(sizeof(U));
        U v{0};
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
        return v;
    }
    bool done() const { return pos_ == in_.size(); }
    const std::string& source() const { return source_; }

private:
    const std::vector<std::uint8_t>& in_;
    std::string source_;
    std::size_t pos_ = 0;
};

template <typename T>
void write_tensor(Writer& w, const std::string& name, const Tensor<T>& t) {
    w.le(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.le(static_cast<std::uint8_t>(std::is_same_v<T, float> ? DType::f32 : DType::f64));
    w.le(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.le(static_cast<std::uint64_t>(d));
    for (T v : t.values()) {
        if constexpr (std::is_same_v<T, float>) w.f32(v);
        else w.f64(v);
    }
}

template <typename T, typename Bits>
Tensor<T> read_payload(Reader& r, Shape shape) {
    std::vector<T> data(shape_size(shape));
    for (auto& v : data) v = std::bit_cast<T>(r.le<Bits>());
    return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes(kMagic, sizeof(kMagic));
    w.le(ckpt.format_version);
    const std::string header = ckpt.hyperparameters.dump();
    w.le(static_cast<std::uint64_t>(header.size()));
    w.bytes(header.data(), header.size());
    w.le(static_cast<std::uint64_t>(ckpt.tensors.size()));
    for (const auto& nt : ckpt.tensors) {
        std::visit([&](const auto& t) { write_tensor(w, nt.name, t); }, nt.tensor);
    }
    return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source) {
    Reader r(bytes, source);
    if (std::memcmp(r.take(sizeof(kMagic)), kMagic, sizeof(kMagic)) != 0) {
        throw IoError(source, "not a checkpoint (bad magic)");
    }
    Checkpoint ckpt;
    ckpt.format_version = r.le<std::uint32_t>();
    if (ckpt.format_version != Checkpoint::kFormatVersion) {
        throw IoError(source, "unsupported checkpoint version " + std::to_string(ckpt.format_version));
    }
    const auto header_len = r.le<std::uint64_t>();
    const auto* hp = r.take(header_len);
    try {
        ckpt.hyperparameters = nlohmann::json::parse(hp, hp + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(source, std::string("bad checkpoint header: ") + e.what());
    }
    const auto count = r.le<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
        NamedTensor nt;
        const auto name_len = r.le<std::uint32_t>();
        const auto* np = r.take(name_len);
        nt.name.assign(reinterpret_cast<const char*>(np), name_len);
        const auto dtype = r.le<std::uint8_t>();
        const auto rank = r.le<std::uint32_t>();
        Shape shape(rank);
        for (auto& d : shape) d = static_cast<std::size_t>(r.le<std::uint64_t>());
        if (dtype == static_cast<std::uint8_t>(DType::f32)) {
            nt.tensor = read_payload<float, std::uint32_t>(r, std::move(shape));
        } else if (dtype == static_cast<std::uint8_t>(DType::f64)) {
            nt.tensor = read_payload<double, std::uint64_t>(r, std::move(shape));
        } else {
            throw IoError(source, "tensor '" + nt.name + "' has unknown dtype " + std::to_string(dtype));
        }
        ckpt.tensors.push_back(std::move(nt));
    }
    if (!r.done()) throw IoError(source, "trailing bytes after checkpoint");
    return ckpt;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    const auto bytes = encode_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(path, "write failed");
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open checkpoint");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes, path);
}

}  // namespace tbn
