#include "c2g/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "c2g/error.hpp"

namespace c2g {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  fields.push_back(field);
  for (std::string& f : fields) {
    std::size_t b = f.find_first_not_of(" \t");
    std::size_t e = f.find_last_not_of(" \t");
    f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc{} && ptr == last && !s.empty();
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name,
                        const std::filesystem::path& path) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(ErrorCode::MissingColumn, path.string() + ": column '" + name + "' not found in header");
}

}  // namespace

LoadResult load_object_csv(const std::filesystem::path& csv_path, const CsvSchema& schema,
                           const ImageMeta& meta, RowPolicy policy) {
  std::ifstream is(csv_path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open: " + csv_path.string());

  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::EmptyFile, csv_path.string() + ": no header row");
  std::vector<std::string> header = split_csv_line(line);

  const std::size_t xi = find_column(header, schema.x_column, csv_path);
  const std::size_t yi = find_column(header, schema.y_column, csv_path);
  std::vector<std::size_t> pi;
  pi.reserve(schema.property_columns.size());
  for (const std::string& col : schema.property_columns) {
    pi.push_back(find_column(header, col, csv_path));
  }

  LoadResult result;
  result.image.width_um = meta.width_um;
  result.image.height_um = meta.height_um;
  result.image.resolution_um_per_px = meta.resolution_um_per_px;
  result.image.label = meta.label;
  result.image.id = meta.id.empty() ? csv_path.stem().string() : meta.id;
  result.image.channels = pi.size();

  long line_no = 1;  // header was line 1
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    ++result.data_rows;
    std::vector<std::string> fields = split_csv_line(line);

    auto reject = [&](ErrorCode code, const std::string& why) {
      if (policy == RowPolicy::Strict) {
        throw Error(code, csv_path.string() + " line " + std::to_string(line_no) + ": " + why, line_no);
      }
      result.rejected_rows.push_back(line_no);
    };

    if (fields.size() != header.size()) {
      reject(ErrorCode::NonFinite, "field count does not match header");
      continue;
    }

    ObjectRecord rec;
    bool ok = parse_double(fields[xi], rec.x_um) && parse_double(fields[yi], rec.y_um);
    rec.props.reserve(pi.size());
    for (std::size_t k = 0; ok && k < pi.size(); ++k) {
      double v = 0.0;
      ok = parse_double(fields[pi[k]], v) && std::isfinite(v);
      if (ok) rec.props.push_back(v);
    }
    if (!ok || !std::isfinite(rec.x_um) || !std::isfinite(rec.y_um)) {
      reject(ErrorCode::NonFinite, "non-finite or unparseable value");
      continue;
    }
    if (rec.x_um < 0.0 || rec.x_um >= meta.width_um || rec.y_um < 0.0 || rec.y_um >= meta.height_um) {
      reject(ErrorCode::OutOfBounds, "coordinates outside [0," + std::to_string(meta.width_um) + ")x[0," +
                                         std::to_string(meta.height_um) + ")");
      continue;
    }
    result.image.objects.push_back(std::move(rec));
  }

  if (result.data_rows == 0) {
    throw Error(ErrorCode::EmptyFile, csv_path.string() + ": no data rows");
  }
  result.image.validate();
  return result;
}

std::pair<CsvSchema, ImageMeta> load_sidecar(const std::filesystem::path& json_path) {
  std::ifstream is(json_path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open sidecar: " + json_path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, json_path.string() + ": " + e.what());
  }

  CsvSchema schema;
  ImageMeta meta;
  try {
    meta.width_um = j.at("width_um").get<double>();
    meta.height_um = j.at("height_um").get<double>();
    meta.resolution_um_per_px = j.value("resolution_um_per_px", 0.0);
    for (const auto& c : j.at("channels")) schema.property_columns.push_back(c.get<std::string>());
    if (j.contains("label") && !j["label"].is_null()) meta.label = j["label"].get<int>();
    if (j.contains("x_column")) schema.x_column = j["x_column"].get<std::string>();
    if (j.contains("y_column")) schema.y_column = j["y_column"].get<std::string>();
    if (j.contains("id")) meta.id = j["id"].get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, json_path.string() + ": " + e.what());
  }
  return {schema, meta};
}

LoadResult load_object_csv_with_sidecar(const std::filesystem::path& csv_path, RowPolicy policy) {
  std::filesystem::path sidecar = csv_path;
  sidecar.replace_extension(".json");
  auto [schema, meta] = load_sidecar(sidecar);
  return load_object_csv(csv_path, schema, meta, policy);
}

void write_object_csv(const ObjectImage& img, const std::vector<std::string>& channel_names,
                      const std::filesystem::path& csv_path) {
  if (channel_names.size() != img.channels) {
    throw Error(ErrorCode::DimensionMismatch, "channel name count does not match image channels");
  }
  std::ofstream os(csv_path);
  if (!os) throw Error(ErrorCode::IoError, "cannot open for writing: " + csv_path.string());
  os << "x_um,y_um";
  for (const std::string& c : channel_names) os << ',' << c;
  os << '\n';
  os.precision(17);
  for (const ObjectRecord& o : img.objects) {
    os << o.x_um << ',' << o.y_um;
    for (double v : o.props) os << ',' << v;
    os << '\n';
  }

  nlohmann::json j;
  j["width_um"] = img.width_um;
  j["height_um"] = img.height_um;
  j["resolution_um_per_px"] = img.resolution_um_per_px;
  j["channels"] = channel_names;
  j["id"] = img.id;
  if (img.label) j["label"] = *img.label;
  std::filesystem::path sidecar = csv_path;
  sidecar.replace_extension(".json");
  std::ofstream js(sidecar);
  if (!js) throw Error(ErrorCode::IoError, "cannot open for writing: " + sidecar.string());
  js << j.dump(2) << '\n';
}

}  // namespace c2g
