#include "atnf/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <set>

#include "atnf/error.hpp"
#include "atnf/image_io.hpp"

namespace atnf::model_io {

namespace {

static_assert(std::endian::native == std::endian::little, "container I/O assumes a little-endian host");

class Writer {
 public:
  template <class T>
  void put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void bytes(const std::string& s) { out_ += s; }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, s_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string v = s_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (s_.size() - pos_ < n) throw ModelError("model file is truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize(const ModelGraph& model) {
  Writer w;
  w.bytes("ATNF");
  w.put<std::uint32_t>(kFormatVersion);
  w.put<std::uint64_t>(model.seed);
  w.put<std::uint32_t>(backbone::kStages);
  for (int c : backbone::kStageChannels) w.put<std::uint32_t>(static_cast<std::uint32_t>(c));
  w.put<std::uint32_t>(model.trained);
  w.put<std::uint32_t>(model.frozen);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.criterion));
  std::uint32_t count = 0;
  model.visit([&](const std::string&, const Tensor&) { ++count; });
  w.put<std::uint32_t>(count);
  model.visit([&](const std::string& name, const Tensor& t) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.put<std::uint8_t>(kDtypeF32);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    for (double v : t.values()) w.put<float>(static_cast<float>(v));
  });
  return w.take();
}

ModelGraph deserialize(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(4) != "ATNF") throw ModelError("not a model file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kFormatVersion) throw ModelError("unsupported model format version " + std::to_string(version));
  const auto seed = r.get<std::uint64_t>();
  const auto stages = r.get<std::uint32_t>();
  if (stages != backbone::kStages) throw ModelError("model has an unsupported stage count");
  for (int c : backbone::kStageChannels) {
    if (r.get<std::uint32_t>() != static_cast<std::uint32_t>(c)) throw ModelError("model stage schedule differs");
  }
  ModelGraph m = ModelGraph::seeded(seed);
  m.trained = r.get<std::uint32_t>();
  m.frozen = r.get<std::uint32_t>();
  const auto crit = r.get<std::uint32_t>();
  if (crit > static_cast<std::uint32_t>(attention::CriterionMode::learned)) throw ModelError("unknown criterion");
  m.criterion = static_cast<attention::CriterionMode>(crit);

  std::map<std::string, Tensor*> slots;
  m.visit([&](const std::string& name, Tensor& t) { slots[name] = &t; });
  std::set<std::string> seen;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    const std::string name = r.bytes(len);
    auto it = slots.find(name);
    if (it == slots.end()) throw ModelError("model file has unknown tensor '" + name + "'");
    if (!seen.insert(name).second) throw ModelError("model file repeats tensor '" + name + "'");
    if (r.get<std::uint8_t>() != kDtypeF32) throw ModelError("tensor '" + name + "' has an unsupported dtype");
    const auto rank = r.get<std::uint32_t>();
    if (rank < 1 || rank > 4) throw ModelError("tensor '" + name + "' has invalid rank");
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(r.get<std::uint32_t>()));
    Tensor& dst = *it->second;
    if (shape != dst.shape()) throw ModelError("tensor '" + name + "' has the wrong shape");
    for (double& v : dst.values()) {
      const float f = r.get<float>();
      if (!std::isfinite(f)) throw ModelError("tensor '" + name + "' holds a non-finite value");
      v = f;
    }
  }
  if (!r.done()) throw ModelError("trailing bytes after the last tensor");
  for (const auto& [name, t] : slots) {
    if (!seen.contains(name)) throw ModelError("model file is missing tensor '" + name + "'");
  }
  return m;
}

void save(const ModelGraph& model, const std::filesystem::path& path) { io::write_file_atomic(path, serialize(model)); }

ModelGraph load(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

}  // namespace atnf::model_io
