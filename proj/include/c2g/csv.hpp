#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "c2g/types.hpp"

namespace c2g {

/// Maps CSV columns to object fields. Property columns are user-supplied
/// (typically via the JSON sidecar) because segmentation exports differ.
struct CsvSchema {
  std::string x_column = "x_um";
  std::string y_column = "y_um";
  std::vector<std::string> property_columns;
};

/// Extent/resolution/label metadata that does not live in the CSV itself.
struct ImageMeta {
  double width_um = 0.0;
  double height_um = 0.0;
  double resolution_um_per_px = 0.0;
  std::optional<int> label;
  std::string id;
};

/// Strict: the first bad row raises OutOfBounds/NonFinite naming its line.
/// SkipBadRows: bad rows are collected in LoadResult::rejected_rows instead,
/// so accepted + rejected always equals the file's data row count.
enum class RowPolicy { Strict, SkipBadRows };

struct LoadResult {
  ObjectImage image;
  std::vector<long> rejected_rows;  // 1-based file line numbers
  std::size_t data_rows = 0;
};

LoadResult load_object_csv(const std::filesystem::path& csv_path, const CsvSchema& schema,
                           const ImageMeta& meta, RowPolicy policy = RowPolicy::Strict);

/// Reads `<csv stem>.json` next to the CSV for schema + metadata.
/// Sidecar keys: width_um, height_um, resolution_um_per_px, channels (array of
/// property column names), and optionally label, x_column, y_column, id.
LoadResult load_object_csv_with_sidecar(const std::filesystem::path& csv_path,
                                        RowPolicy policy = RowPolicy::Strict);

std::pair<CsvSchema, ImageMeta> load_sidecar(const std::filesystem::path& json_path);

/// Writes an object table plus sidecar; the inverse of the loaders, used by
/// the synth subcommand to emit compressible inputs.
void write_object_csv(const ObjectImage& img, const std::vector<std::string>& channel_names,
                      const std::filesystem::path& csv_path);

}  // namespace c2g
