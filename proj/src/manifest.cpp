#include "lut/manifest.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "json.hpp"
#include "lut/error.hpp"

namespace lut {

using nlohmann::json;

namespace {

json tokens_json(const Vocab& vocab, const std::vector<int>& ids) {
  json arr = json::array();
  for (int id : ids) arr.push_back(vocab.token(id));
  return arr;
}

std::vector<int> tokens_from(const Vocab& vocab, const json& arr, const std::string& where) {
  if (!arr.is_array()) throw FormatError(where + ": token list expected");
  std::vector<int> ids;
  for (const auto& t : arr) {
    if (!t.is_string()) throw FormatError(where + ": tokens must be strings");
    ids.push_back(vocab.id(t.get<std::string>()));
  }
  return ids;
}

}  // namespace

void write_feature_file(const std::filesystem::path& path, const Tensor& frames) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  const auto T = static_cast<std::uint32_t>(frames.rows());
  const auto F = static_cast<std::uint32_t>(frames.cols());
  os.write(reinterpret_cast<const char*>(&T), 4);
  os.write(reinterpret_cast<const char*>(&F), 4);
  for (double v : frames.data()) {
    const auto f = static_cast<float>(v);
    os.write(reinterpret_cast<const char*>(&f), 4);
  }
}

Tensor read_feature_file(const std::filesystem::path& path) {
  static_assert(std::endian::native == std::endian::little);
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open feature file " + path.string());
  std::uint32_t T = 0, F = 0;
  is.read(reinterpret_cast<char*>(&T), 4);
  is.read(reinterpret_cast<char*>(&F), 4);
  if (!is) throw FormatError("feature file header truncated: " + path.string());
  std::vector<float> raw(static_cast<std::size_t>(T) * F);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
  if (!is) throw FormatError("feature file truncated: " + path.string());
  return Tensor::matrix(T, F, std::vector<double>(raw.begin(), raw.end()));
}

void write_manifest(const std::filesystem::path& path, const std::vector<Utterance>& utts,
                    const Vocab& source, const Vocab& target, const ManifestOptions& options) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write manifest " + path.string());
  os << json{{"format", "lut-manifest"}, {"version", kManifestVersion}}.dump() << '\n';
  std::filesystem::path feature_dir;
  if (options.external_features) {
    feature_dir = path.filename().string() + ".features";
    std::filesystem::create_directories(path.parent_path() / feature_dir);
  }
  for (const auto& u : utts) {
    json rec;
    rec["utt_id"] = u.id;
    if (options.external_features) {
      const auto rel = feature_dir / (u.id + ".feat");
      write_feature_file(path.parent_path() / rel, u.features);
      rec["features"] = rel.generic_string();
    } else {
      json rows = json::array();
      for (std::size_t t = 0; t < u.frames(); ++t) {
        json row = json::array();
        for (std::size_t j = 0; j < u.feature_dim(); ++j) row.push_back(u.features.at(t, j));
        rows.push_back(std::move(row));
      }
      rec["features"] = std::move(rows);
    }
    rec["z"] = tokens_json(source, u.z);
    rec["y"] = u.y ? tokens_json(target, *u.y) : json(nullptr);
    rec["speaker_id"] = u.speaker_id;
    rec["intent_id"] = u.intent_id;
    os << rec.dump() << '\n';
  }
}

std::vector<Utterance> read_manifest(const std::filesystem::path& path, const Vocab& source,
                                     const Vocab& target) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open manifest " + path.string());
  std::string line;
  std::vector<Utterance> utts;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!header_seen) {
      if (rec.value("format", "") != "lut-manifest") {
        throw FormatError(where + ": missing lut-manifest header");
      }
      if (rec.value("version", 0) != kManifestVersion) {
        throw FormatError(where + ": unsupported manifest version");
      }
      header_seen = true;
      continue;
    }
    try {
      Utterance u;
      u.id = rec.at("utt_id").get<std::string>();
      const json& f = rec.at("features");
      if (f.is_string()) {
        u.features = read_feature_file(path.parent_path() / f.get<std::string>());
      } else {
        if (!f.is_array() || f.empty()) throw FormatError(where + ": empty feature rows");
        const std::size_t width = f.at(0).size();
        std::vector<double> values;
        for (const auto& row : f) {
          if (row.size() != width) throw FormatError(where + ": ragged feature rows");
          for (const auto& v : row) values.push_back(v.get<double>());
        }
        u.features = Tensor::matrix(f.size(), width, std::move(values));
      }
      u.z = tokens_from(source, rec.at("z"), where);
      if (!rec.at("y").is_null()) u.y = tokens_from(target, rec.at("y"), where);
      u.speaker_id = rec.at("speaker_id").get<int>();
      u.intent_id = rec.at("intent_id").get<int>();
      utts.push_back(std::move(u));
    } catch (const json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  if (!header_seen && line_no > 0) throw FormatError(path.string() + ": missing header");
  return utts;
}

}  // namespace lut
