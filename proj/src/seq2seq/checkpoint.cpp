#include "csrlab/error.hpp"
#include "csrlab/seq2seq.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace csrlab::seq2seq {

namespace {

constexpr char kMagic[8] = {'C', 'S', 'R', 'L', 'A', 'B', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream &out, T v) {
    out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <class T>
T get(std::istream &in, const std::filesystem::path &path) {
    T v{};
    if (!in.read(reinterpret_cast<char *>(&v), sizeof(T)))
        throw Error(ErrorKind::format, "truncated checkpoint " + path.string());
    return v;
}

} // namespace

void save_checkpoint(const Seq2SeqModel &model, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
    const auto &c = model.config;
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kVersion);
    for (int v : {c.vocab_size, c.dim, c.layers, c.heads, c.ffn_dim, c.max_len}) put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
    put<double>(out, c.dropout);
    put<std::uint64_t>(out, c.seed);

    std::uint32_t blocks = 0;
    for_each_tensor(model.params, [&](const std::string &, const double *, Eigen::Index) { ++blocks; });
    put<std::uint32_t>(out, blocks);
    for_each_tensor(model.params, [&](const std::string &name, const double *data, Eigen::Index size) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint64_t>(out, static_cast<std::uint64_t>(size));
        for (Eigen::Index i = 0; i < size; ++i) put<float>(out, static_cast<float>(data[i]));
    });
    if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

Seq2SeqModel load_checkpoint(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw Error(ErrorKind::format, path.string() + " is not a checkpoint");
    if (const auto v = get<std::uint32_t>(in, path); v != kVersion)
        throw Error(ErrorKind::format, "unsupported checkpoint version " + std::to_string(v));

    ModelConfig c;
    for (int *field : {&c.vocab_size, &c.dim, &c.layers, &c.heads, &c.ffn_dim, &c.max_len})
        *field = static_cast<int>(get<std::uint32_t>(in, path));
    c.dropout = get<double>(in, path);
    c.seed = get<std::uint64_t>(in, path);
    try {
        c.validate();
    } catch (const Error &e) {
        throw Error(ErrorKind::format, std::string("bad checkpoint header: ") + e.what());
    }

    Seq2SeqModel model{c, Parameters::zeros(c)};
    std::uint32_t expected = 0;
    for_each_tensor(model.params, [&](const std::string &, double *, Eigen::Index) { ++expected; });
    if (get<std::uint32_t>(in, path) != expected) throw Error(ErrorKind::format, "checkpoint tensor count mismatch");

    for_each_tensor(model.params, [&](const std::string &name, double *data, Eigen::Index size) {
        const auto len = get<std::uint32_t>(in, path);
        std::string stored(len, '\0');
        if (!in.read(stored.data(), len)) throw Error(ErrorKind::format, "truncated checkpoint " + path.string());
        if (stored != name) throw Error(ErrorKind::format, "expected tensor " + name + ", found " + stored);
        if (get<std::uint64_t>(in, path) != static_cast<std::uint64_t>(size))
            throw Error(ErrorKind::format, "size mismatch for tensor " + name);
        for (Eigen::Index i = 0; i < size; ++i) data[i] = static_cast<double>(get<float>(in, path));
    });
    if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorKind::format, "trailing bytes in checkpoint");
    return model;
}

} // namespace csrlab::seq2seq
