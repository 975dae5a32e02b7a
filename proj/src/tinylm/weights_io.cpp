#include "crelab/tinylm/weights_io.hpp"

#include "crelab/common/error.hpp"
#include "crelab/common/hash.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace crelab::tinylm {

static_assert(std::endian::native == std::endian::little,
              "weight files are little-endian; big-endian hosts need byte swapping");

namespace {

constexpr char kMagic[4] = {'T', 'L', 'M', '1'};

template <class T>
void put(std::string& buf, T value) {
  char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  buf.append(raw, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <class T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > data_.size()) throw LoadError(0, std::string("truncated file at ") + what);
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void read_floats(std::span<float> out) {
    const std::size_t bytes = out.size() * sizeof(float);
    if (pos_ + bytes > data_.size()) throw LoadError(0, "truncated tensor data");
    std::memcpy(out.data(), data_.data() + pos_, bytes);
    pos_ += bytes;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_model(const Model& model, const std::string& path) {
  const ModelConfig& c = model.config();
  std::string buf(kMagic, 4);
  put<std::uint32_t>(buf, kWeightFormatVersion);
  for (int v : {c.n_layers, c.n_heads, c.d_model, c.d_head, c.vocab_size, c.max_seq_len, c.d_ff()}) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(v));
  }
  put<std::uint64_t>(buf, c.seed);
  put<std::uint64_t>(buf, model.weights().parameter_count());
  for (auto t : model.weights().tensors()) {
    buf.append(reinterpret_cast<const char*>(t.data()), t.size_bytes());
  }
  put<std::uint64_t>(buf, fnv1a64(buf));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write weight file '" + path + "'");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing weight file '" + path + "'");
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weight file '" + path + "'");
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 4 + 8 || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw LoadError(0, "'" + path + "' is not a TLM1 weight file");
  }
  const std::string_view body(data.data(), data.size() - 8);
  std::uint64_t stored = 0;
  std::memcpy(&stored, data.data() + body.size(), 8);
  if (stored != fnv1a64(body)) throw LoadError(0, "'" + path + "': checksum mismatch");

  Reader r(body);
  r.get<std::uint32_t>("magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kWeightFormatVersion) {
    throw LoadError(0, "unsupported weight format version " + std::to_string(version));
  }
  ModelConfig c;
  c.n_layers = static_cast<int>(r.get<std::uint32_t>("n_layers"));
  c.n_heads = static_cast<int>(r.get<std::uint32_t>("n_heads"));
  c.d_model = static_cast<int>(r.get<std::uint32_t>("d_model"));
  c.d_head = static_cast<int>(r.get<std::uint32_t>("d_head"));
  c.vocab_size = static_cast<int>(r.get<std::uint32_t>("vocab_size"));
  c.max_seq_len = static_cast<int>(r.get<std::uint32_t>("max_seq_len"));
  const auto d_ff = static_cast<int>(r.get<std::uint32_t>("d_ff"));
  c.seed = r.get<std::uint64_t>("seed");
  const auto count = r.get<std::uint64_t>("parameter count");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw LoadError(0, std::string("invalid config block: ") + e.what());
  }
  if (d_ff != c.d_ff()) throw LoadError(0, "d_ff does not match d_model");

  Weights w = Weights::zeros(c);
  if (count != w.parameter_count()) throw LoadError(0, "parameter count does not match config");
  for (auto t : w.tensors()) r.read_floats(t);
  if (r.pos() != body.size()) throw LoadError(0, "trailing bytes after tensor data");
  return Model(c, std::move(w));
}

Model load_model(const std::string& path, const ModelConfig& expected) {
  Model m = load_model(path);
  if (!(m.config() == expected)) {
    const ModelConfig& c = m.config();
    throw LoadError(0, "config mismatch in '" + path + "': file has n_layers=" +
                           std::to_string(c.n_layers) + " n_heads=" + std::to_string(c.n_heads) +
                           " d_model=" + std::to_string(c.d_model) + " vocab_size=" +
                           std::to_string(c.vocab_size) + " max_seq_len=" +
                           std::to_string(c.max_seq_len) + " seed=" + std::to_string(c.seed));
  }
  return m;
}

}  // namespace crelab::tinylm
