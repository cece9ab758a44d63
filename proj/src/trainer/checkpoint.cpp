#include "abc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <unordered_map>

namespace abc {

std::string to_string(CheckpointErrorCode code) {
  switch (code) {
    case CheckpointErrorCode::io: return "io error";
    case CheckpointErrorCode::bad_magic: return "bad magic";
    case CheckpointErrorCode::version_mismatch: return "version mismatch";
    case CheckpointErrorCode::truncated_payload: return "truncated payload";
    case CheckpointErrorCode::malformed: return "malformed";
    case CheckpointErrorCode::parameter_mismatch: return "parameter mismatch";
  }
  return "unknown";
}

namespace {

class Writer {
 public:
  void bytes(const void* src, std::size_t n) { out_.append(static_cast<const char*>(src), n); }
  template <class T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) {
      throw CheckpointError(CheckpointErrorCode::truncated_payload,
                            "needed " + std::to_string(n) + " bytes at offset " + std::to_string(pos_));
    }
  }
  template <class T>
  T uint() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

void write_table(Writer& w, const std::vector<StoredTensor>& table) {
  w.uint(static_cast<std::uint32_t>(table.size()));
  for (const auto& t : table) {
    if (t.name.size() > 0xFFFF) throw CheckpointError(CheckpointErrorCode::malformed, "name too long: " + t.name);
    if (t.shape.size() > 0xFF) throw CheckpointError(CheckpointErrorCode::malformed, "rank too large: " + t.name);
    if (shape_numel(t.shape) != t.data.size()) {
      throw CheckpointError(CheckpointErrorCode::malformed, "payload/shape mismatch for " + t.name);
    }
    w.uint(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.uint(static_cast<std::uint8_t>(t.shape.size()));
    for (std::size_t d : t.shape) w.uint(static_cast<std::uint32_t>(d));
    for (float v : t.data) w.f32(v);
  }
}

std::vector<StoredTensor> read_table(Reader& r) {
  const auto count = r.uint<std::uint32_t>();
  std::vector<StoredTensor> table;
  for (std::uint32_t i = 0; i < count; ++i) {
    StoredTensor t;
    t.name = r.str(r.uint<std::uint16_t>());
    const auto rank = r.uint<std::uint8_t>();
    std::uint64_t numel = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      const auto dim = r.uint<std::uint32_t>();
      if (dim == 0) throw CheckpointError(CheckpointErrorCode::malformed, "zero dimension in " + t.name);
      t.shape.push_back(dim);
      numel *= dim;
    }
    r.need(numel * 4);
    t.data.resize(numel);
    for (auto& v : t.data) v = r.f32();
    table.push_back(std::move(t));
  }
  return table;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes("ABCK", 4);
  w.uint(kCheckpointVersion);
  write_table(w, ckpt.parameters);
  write_table(w, ckpt.moments);
  w.uint(ckpt.step);
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "ABCK") != 0) {
    throw CheckpointError(CheckpointErrorCode::bad_magic, "file does not start with 'ABCK'");
  }
  Reader r(bytes);
  r.str(4);
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorCode::version_mismatch,
                          "file version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
  }
  Checkpoint ckpt;
  ckpt.parameters = read_table(r);
  ckpt.moments = read_table(r);
  ckpt.step = r.uint<std::uint64_t>();
  if (!r.done()) throw CheckpointError(CheckpointErrorCode::malformed, "trailing bytes after step counter");
  return ckpt;
}

Checkpoint make_checkpoint(const AbcNet& model, const AdamWState& state) {
  const ParamList params = model.parameters();
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw CheckpointError(CheckpointErrorCode::parameter_mismatch, "optimizer state does not match the model");
  }
  Checkpoint ckpt;
  for (const auto& p : params) {
    ckpt.parameters.push_back({p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.moments.push_back({"adam.m." + params[i].name, params[i].tensor.shape(), state.first_moment[i]});
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.moments.push_back({"adam.v." + params[i].name, params[i].tensor.shape(), state.second_moment[i]});
  }
  ckpt.step = state.step;
  return ckpt;
}

void restore_checkpoint(const Checkpoint& ckpt, AbcNet& model, AdamWState& state) {
  ParamList params = model.parameters();
  auto mismatch = [](const std::string& what) { return CheckpointError(CheckpointErrorCode::parameter_mismatch, what); };
  if (ckpt.parameters.size() != params.size()) {
    throw mismatch("checkpoint has " + std::to_string(ckpt.parameters.size()) + " parameters, model has " +
                   std::to_string(params.size()));
  }
  if (ckpt.moments.size() != 2 * params.size()) throw mismatch("optimizer moment count does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& stored = ckpt.parameters[i];
    if (stored.name != params[i].name || stored.shape != params[i].tensor.shape()) {
      throw mismatch("expected " + params[i].name + " " + shape_str(params[i].tensor.shape()) + ", found " +
                     stored.name + " " + shape_str(stored.shape));
    }
    const auto& m = ckpt.moments[i];
    const auto& v = ckpt.moments[params.size() + i];
    if (m.name != "adam.m." + params[i].name || v.name != "adam.v." + params[i].name ||
        m.data.size() != stored.data.size() || v.data.size() != stored.data.size()) {
      throw mismatch("optimizer moments do not match " + params[i].name);
    }
  }
  AdamWState restored;
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::ranges::copy(ckpt.parameters[i].data, params[i].tensor.mutable_data().begin());
    restored.first_moment.push_back(ckpt.moments[i].data);
    restored.second_moment.push_back(ckpt.moments[params.size() + i].data);
  }
  restored.step = ckpt.step;
  state = std::move(restored);
}

void save_checkpoint(const AbcNet& model, const AdamWState& state, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(make_checkpoint(model, state));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointErrorCode::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(CheckpointErrorCode::io, "write failed for " + path.string());
}

Checkpoint read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointErrorCode::io, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void load_checkpoint(const std::filesystem::path& path, AbcNet& model, AdamWState& state) {
  restore_checkpoint(read_checkpoint_file(path), model, state);
}

}  // namespace abc
