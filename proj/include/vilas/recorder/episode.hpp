#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vilas/error.hpp"
#include "vilas/sim/model.hpp"

namespace vilas::recorder {

namespace fs = std::filesystem;
using sim::StateVector;

inline constexpr const char* kFormat = "vilas-episode/1";

/// One line of states.jsonl.
struct FrameRecord {
  std::int64_t index = 0;
  double t_ms = 0;
  double image_t_ms = 0;  // capture time of the paired camera images
  StateVector state{};
  StateVector action{};
  std::string prompt;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct EpisodeMeta {
  std::string episode_id;
  std::string prompt;
  double record_rate_hz = 30.0;
  std::int64_t frame_count = 0;
  std::string created_at;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  bool truncated = false;
  std::string truncation_reason;
  int image_size = 224;
};

void to_json(nlohmann::json& j, const EpisodeMeta& m);
void from_json(const nlohmann::json& j, EpisodeMeta& m);

std::string frame_line(const FrameRecord& f);
FrameRecord parse_frame_line(const std::string& line);

/// Integrity failure naming the offending file and, when known, the frame.
class IntegrityError : public Error {
 public:
  IntegrityError(std::string file, std::int64_t frame, const std::string& what);
  const std::string& file() const { return file_; }
  std::int64_t frame() const { return frame_; }

 private:
  std::string file_;
  std::int64_t frame_;
};

struct Episode {
  fs::path dir;
  EpisodeMeta meta;
  std::vector<FrameRecord> frames;

  fs::path base_image(std::int64_t i) const;
  fs::path wrist_image(std::int64_t i) const;
};

std::string image_name(std::int64_t index);

/// Reads and validates an episode directory. With check_images every
/// referenced PNG must exist and carry a PNG signature. Temporary
/// directories of unfinished recordings are always rejected.
Episode load_episode(const fs::path& dir, bool check_images = true);

/// Raw PNG bytes of one stored image.
std::string read_image(const fs::path& file);

/// Episode directories under root (direct children holding meta.json or
/// unfinished temp directories, which load_episode will reject).
std::vector<fs::path> find_episodes(const fs::path& root);

struct CorpusReport {
  int episodes = 0;
  std::int64_t frames = 0;
  std::vector<std::string> errors;
  double seconds = 0;
};

CorpusReport verify_corpus(const fs::path& root);

enum class ExportSchema { canonical, table };
ExportSchema parse_schema(const std::string& s);

struct ExportResult {
  std::vector<fs::path> outputs;
  std::int64_t rows = 0;
};

/// canonical copies episodes in the native layout; table writes one CSV per
/// episode (<id>.csv) plus copied images under <id>/. Episodes with
/// different record rates are refused unless allow_mixed.
ExportResult export_dataset(const std::vector<fs::path>& episodes, const fs::path& out, ExportSchema schema,
                            bool allow_mixed = false);

/// Column names of the table schema, in order.
std::vector<std::string> table_columns();

/// Parses a table CSV back into frame records.
std::vector<FrameRecord> read_table(const fs::path& csv);

}  // namespace vilas::recorder
