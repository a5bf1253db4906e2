#include "atnf/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "atnf/error.hpp"
#include "atnf/image_io.hpp"

namespace atnf {

namespace fs = std::filesystem;

std::vector<Sample> to_samples(const std::vector<synthetic::SyntheticPair>& pairs, std::uint64_t first_index) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "pair_%04llu", static_cast<unsigned long long>(first_index + i));
    out.push_back({name, pairs[i].a, pairs[i].b, pairs[i].truth});
  }
  return out;
}

void write_dataset(const fs::path& dir, const std::vector<Sample>& samples, std::optional<std::uint64_t> seed) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());
  nlohmann::json manifest;
  if (seed) manifest["seed"] = *seed;
  manifest["count"] = samples.size();
  manifest["pairs"] = nlohmann::json::array();
  for (const auto& s : samples) {
    nlohmann::json entry{{"name", s.name}, {"a", s.name + "_a.png"}, {"b", s.name + "_b.png"}};
    io::save_image(s.a, dir / (s.name + "_a.png"));
    io::save_image(s.b, dir / (s.name + "_b.png"));
    if (s.truth) {
      entry["mask"] = s.name + "_mask.png";
      io::save_image(s.truth->to_image(), dir / (s.name + "_mask.png"));
    }
    manifest["pairs"].push_back(entry);
  }
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

namespace {

Sample load_sample(const fs::path& dir, const std::string& name, const fs::path& a, const fs::path& b,
                   const std::optional<fs::path>& mask) {
  Sample s{name, io::load_image(dir / a), io::load_image(dir / b), std::nullopt};
  if (!s.a.same_shape(s.b)) throw DataError("pair '" + name + "' has images of different sizes");
  if (mask) {
    const Image m = io::load_image(dir / *mask);
    if (!m.same_shape(s.a)) throw DataError("mask of pair '" + name + "' is not aligned with its images");
    std::vector<double> bits(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) bits[i] = m[i] >= 0.5 ? 1.0 : 0.0;
    s.truth = SaliencyMap(m.height(), m.width(), std::move(bits));
  }
  return s;
}

}  // namespace

std::vector<Sample> read_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory '" + dir.string() + "' does not exist");
  std::vector<Sample> out;
  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    nlohmann::json manifest;
    try {
      manifest = nlohmann::json::parse(io::read_file(manifest_path));
      for (const auto& e : manifest.at("pairs")) {
        std::optional<fs::path> mask;
        if (e.contains("mask")) mask = e.at("mask").get<std::string>();
        out.push_back(load_sample(dir, e.at("name").get<std::string>(), e.at("a").get<std::string>(),
                                  e.at("b").get<std::string>(), mask));
      }
    } catch (const nlohmann::json::exception& ex) {
      throw DataError("malformed manifest '" + manifest_path.string() + "': " + ex.what());
    }
  } else {
    struct Files {
      std::optional<fs::path> a, b, mask;
    };
    std::map<std::string, Files> found;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const auto ext = entry.path().extension().string();
      if (ext != ".png" && ext != ".pgm") continue;
      const std::string stem = entry.path().stem().string();
      auto match = [&](const std::string& suffix) {
        return stem.size() > suffix.size() && stem.ends_with(suffix);
      };
      const fs::path file = entry.path().filename();
      if (match("_a")) found[stem.substr(0, stem.size() - 2)].a = file;
      else if (match("_b")) found[stem.substr(0, stem.size() - 2)].b = file;
      else if (match("_mask")) found[stem.substr(0, stem.size() - 5)].mask = file;
    }
    for (const auto& [name, f] : found) {
      if (!f.a || !f.b) throw DataError("pair '" + name + "' in '" + dir.string() + "' lacks its a or b image");
      out.push_back(load_sample(dir, name, *f.a, *f.b, f.mask));
    }
  }
  if (out.empty()) throw DataError("dataset directory '" + dir.string() + "' holds no image pairs");
  return out;
}

}  // namespace atnf
