#include "vilas/recorder/episode.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace vilas::recorder {

using nlohmann::json;

namespace {

constexpr char kPngSignature[] = "\x89PNG\r\n\x1a\n";

bool has_png_signature(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  char buf[8] = {};
  if (!in.read(buf, 8)) return false;
  return std::equal(buf, buf + 8, kPngSignature);
}

bool is_temp_dir(const fs::path& dir) {
  const auto name = dir.filename().string();
  return !name.empty() && name.front() == '.' && name.size() > 4 && name.ends_with(".tmp");
}

fs::path normalized(const fs::path& dir) {
  auto p = dir;
  if (p.filename().empty()) p = p.parent_path();
  return p;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

}  // namespace

void to_json(json& j, const EpisodeMeta& m) {
  j = json{{"format", kFormat},
           {"episode_id", m.episode_id},
           {"prompt", m.prompt},
           {"record_rate_hz", m.record_rate_hz},
           {"frame_count", m.frame_count},
           {"created_at", m.created_at},
           {"config", m.config},
           {"seed", m.seed},
           {"truncated", m.truncated},
           {"image_size", m.image_size}};
  if (m.truncated) j["truncation_reason"] = m.truncation_reason;
}

void from_json(const json& j, EpisodeMeta& m) {
  m.episode_id = j.at("episode_id").get<std::string>();
  m.prompt = j.at("prompt").get<std::string>();
  m.record_rate_hz = j.at("record_rate_hz").get<double>();
  m.frame_count = j.at("frame_count").get<std::int64_t>();
  m.created_at = j.value("created_at", "");
  m.config = j.value("config", json::object());
  m.seed = j.value("seed", std::uint64_t{0});
  m.truncated = j.value("truncated", false);
  m.truncation_reason = j.value("truncation_reason", "");
  m.image_size = j.value("image_size", 224);
}

std::string frame_line(const FrameRecord& f) {
  return json{{"index", f.index}, {"t_ms", f.t_ms}, {"image_t_ms", f.image_t_ms}, {"state", f.state}, {"action", f.action}, {"prompt", f.prompt}}
      .dump();
}

FrameRecord parse_frame_line(const std::string& line) {
  const json j = json::parse(line);
  FrameRecord f;
  f.index = j.at("index").get<std::int64_t>();
  f.t_ms = j.at("t_ms").get<double>();
  f.image_t_ms = j.value("image_t_ms", f.t_ms);
  const auto& s = j.at("state");
  const auto& a = j.at("action");
  if (!s.is_array() || s.size() != sim::kStateDim) throw std::invalid_argument("state must have 7 entries");
  if (!a.is_array() || a.size() != sim::kStateDim) throw std::invalid_argument("action must have 7 entries");
  s.get_to(f.state);
  a.get_to(f.action);
  f.prompt = j.at("prompt").get<std::string>();
  return f;
}

IntegrityError::IntegrityError(std::string file, std::int64_t frame, const std::string& what)
    : Error(Errc::integrity, frame >= 0 ? fmt::format("{}: frame {}: {}", file, frame, what)
                                        : fmt::format("{}: {}", file, what)),
      file_(std::move(file)),
      frame_(frame) {}

std::string image_name(std::int64_t index) { return fmt::format("{:06d}.png", index); }

fs::path Episode::base_image(std::int64_t i) const { return dir / "cam_base" / image_name(i); }
fs::path Episode::wrist_image(std::int64_t i) const { return dir / "cam_wrist" / image_name(i); }

Episode load_episode(const fs::path& dir_in, bool check_images) {
  const fs::path dir = normalized(dir_in);
  Episode ep;
  ep.dir = dir;
  const fs::path meta_path = dir / "meta.json";
  if (is_temp_dir(dir)) {
    throw IntegrityError(dir.string(), -1, "unfinished recording (temporary directory)");
  }
  {
    std::ifstream in(meta_path);
    if (!in) throw IntegrityError(meta_path.string(), -1, "missing");
    try {
      const json j = json::parse(in);
      if (j.value("format", "") != kFormat) throw std::invalid_argument("unknown format tag");
      ep.meta = j.get<EpisodeMeta>();
    } catch (const std::exception& e) {
      throw IntegrityError(meta_path.string(), -1, std::string("unreadable: ") + e.what());
    }
  }

  const fs::path states_path = dir / "states.jsonl";
  std::ifstream in(states_path);
  if (!in) throw IntegrityError(states_path.string(), -1, "missing");
  std::string line;
  std::int64_t i = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    FrameRecord f;
    try {
      f = parse_frame_line(line);
    } catch (const std::exception& e) {
      throw IntegrityError(states_path.string(), i, std::string("corrupt record: ") + e.what());
    }
    if (f.index != i) throw IntegrityError(states_path.string(), i, fmt::format("index field is {}", f.index));
    for (int k = 0; k < sim::kStateDim; ++k) {
      if (!std::isfinite(f.state[k]) || !std::isfinite(f.action[k])) {
        throw IntegrityError(states_path.string(), i, "non-finite value");
      }
    }
    if (!ep.frames.empty() && !(f.t_ms > ep.frames.back().t_ms)) {
      throw IntegrityError(states_path.string(), i, "t_ms not strictly increasing");
    }
    if (f.image_t_ms > f.t_ms) throw IntegrityError(states_path.string(), i, "image newer than state sample");
    ep.frames.push_back(std::move(f));
    ++i;
  }
  if (static_cast<std::int64_t>(ep.frames.size()) != ep.meta.frame_count) {
    throw IntegrityError(meta_path.string(), -1,
                         fmt::format("frame_count {} does not match {} stored frames", ep.meta.frame_count,
                                     ep.frames.size()));
  }
  if (check_images) {
    for (std::int64_t k = 0; k < ep.meta.frame_count; ++k) {
      for (const auto& p : {ep.base_image(k), ep.wrist_image(k)}) {
        if (!has_png_signature(p)) throw IntegrityError(p.string(), k, "missing or not a PNG image");
      }
    }
  }
  return ep;
}

std::string read_image(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open image " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<fs::path> find_episodes(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::is_directory(root)) return out;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    if (fs::exists(entry.path() / "meta.json") || is_temp_dir(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

CorpusReport verify_corpus(const fs::path& root) {
  const auto t0 = std::chrono::steady_clock::now();
  CorpusReport r;
  for (const auto& dir : find_episodes(root)) {
    try {
      const auto ep = load_episode(dir, true);
      ++r.episodes;
      r.frames += ep.meta.frame_count;
    } catch (const Error& e) {
      r.errors.emplace_back(e.what());
    }
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

ExportSchema parse_schema(const std::string& s) {
  if (s == "canonical") return ExportSchema::canonical;
  if (s == "table") return ExportSchema::table;
  throw Error(Errc::invalid_argument, "unknown export schema '" + s + "' (canonical|table)");
}

std::vector<std::string> table_columns() {
  std::vector<std::string> cols{"index", "t_ms"};
  for (int i = 0; i < sim::kStateDim; ++i) cols.push_back(fmt::format("state_{}", i));
  for (int i = 0; i < sim::kStateDim; ++i) cols.push_back(fmt::format("action_{}", i));
  cols.insert(cols.end(), {"image_base", "image_wrist", "prompt"});
  return cols;
}

ExportResult export_dataset(const std::vector<fs::path>& episodes, const fs::path& out, ExportSchema schema,
                            bool allow_mixed) {
  std::vector<Episode> eps;
  eps.reserve(episodes.size());
  for (const auto& p : episodes) eps.push_back(load_episode(p, true));
  std::set<double> rates;
  for (const auto& e : eps) rates.insert(e.meta.record_rate_hz);
  if (rates.size() > 1 && !allow_mixed) {
    throw Error(Errc::mixed_rates, "episodes were recorded at different rates; pass --allow-mixed to export anyway");
  }
  fs::create_directories(out);

  ExportResult result;
  json manifest = {{"schema", schema == ExportSchema::canonical ? "canonical" : "table"},
                   {"episodes", json::array()}};
  for (const auto& ep : eps) {
    const std::string id = ep.meta.episode_id;
    if (schema == ExportSchema::canonical) {
      const fs::path dst = out / id;
      fs::create_directories(dst);
      fs::copy(ep.dir, dst, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
      result.outputs.push_back(dst);
    } else {
      const fs::path img_dir = out / id;
      fs::create_directories(img_dir);
      fs::copy(ep.dir / "cam_base", img_dir / "cam_base",
               fs::copy_options::recursive | fs::copy_options::overwrite_existing);
      fs::copy(ep.dir / "cam_wrist", img_dir / "cam_wrist",
               fs::copy_options::recursive | fs::copy_options::overwrite_existing);
      const fs::path csv = out / (id + ".csv");
      std::ofstream f(csv);
      if (!f) throw Error(Errc::io, "cannot write " + csv.string());
      const auto cols = table_columns();
      for (std::size_t c = 0; c < cols.size(); ++c) f << (c ? "," : "") << cols[c];
      f << "\n";
      for (const auto& fr : ep.frames) {
        f << fr.index << "," << fmt::format("{}", fr.t_ms);
        for (double v : fr.state) f << "," << fmt::format("{}", v);
        for (double v : fr.action) f << "," << fmt::format("{}", v);
        f << "," << id << "/cam_base/" << image_name(fr.index) << "," << id << "/cam_wrist/"
          << image_name(fr.index) << "," << csv_quote(fr.prompt) << "\n";
      }
      if (!f) throw Error(Errc::io, "write failed for " + csv.string());
      result.outputs.push_back(csv);
    }
    result.rows += static_cast<std::int64_t>(ep.frames.size());
    manifest["episodes"].push_back(
        {{"episode_id", id}, {"frames", ep.frames.size()}, {"record_rate_hz", ep.meta.record_rate_hz}});
  }
  manifest["rows"] = result.rows;
  std::ofstream(out / "manifest.json") << manifest.dump(2) << "\n";
  return result;
}

std::vector<FrameRecord> read_table(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error(Errc::io, "cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != table_columns()) {
    throw IntegrityError(csv.string(), -1, "unexpected header");
  }
  std::vector<FrameRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != table_columns().size()) {
      throw IntegrityError(csv.string(), static_cast<std::int64_t>(out.size()), "wrong column count");
    }
    FrameRecord f;
    f.index = std::stoll(cells[0]);
    f.t_ms = std::stod(cells[1]);
    for (int i = 0; i < sim::kStateDim; ++i) {
      f.state[i] = std::stod(cells[2 + i]);
      f.action[i] = std::stod(cells[2 + sim::kStateDim + i]);
    }
    f.prompt = cells.back();
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace vilas::recorder
