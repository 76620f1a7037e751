#include "detkit/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>

#include "detkit/errors.hpp"

namespace fs = std::filesystem;

namespace detkit {

namespace {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto begin = s.find_first_not_of(ws);
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(ws);
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
    std::size_t start = pos;
    while (pos < line.size() && line[pos] != ' ' && line[pos] != '\t') ++pos;
    if (pos > start) fields.push_back(line.substr(start, pos - start));
  }
  return fields;
}

int parse_class_id(std::string_view token, const std::string& file, int line) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw ParseError(file, line,
                     "invalid class id token '" + std::string(token) + "'");
  }
  return value;
}

// Accepts plain and scientific decimal notation; rejects NaN/inf tokens.
double parse_coordinate(std::string_view token, const std::string& file,
                        int line) {
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), value,
                      std::chars_format::general);
  if (ec != std::errc{} || ptr != token.data() + token.size() ||
      !std::isfinite(value)) {
    throw ParseError(file, line,
                     "invalid numeric token '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open file: " + path.string());
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();  // CRLF
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> read_manifest(const fs::path& path) {
  std::vector<std::string> stems;
  std::set<std::string> seen;
  int line_no = 0;
  for (const std::string& raw : read_lines(path)) {
    ++line_no;
    const std::string stem = trim(raw);
    if (stem.empty()) continue;
    if (!seen.insert(stem).second) {
      throw ParseError(path.string(), line_no,
                       "duplicate image id '" + stem + "'");
    }
    stems.push_back(stem);
  }
  return stems;
}

std::vector<std::string> scan_stems(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw ValidationError("not a directory: " + dir.string());
  }
  std::vector<std::string> stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      stems.push_back(entry.path().stem().string());
    }
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

// Image enumeration order must never influence results.
std::vector<std::string> image_stems(
    const fs::path& dir, const std::optional<fs::path>& manifest) {
  std::vector<std::string> stems =
      manifest ? read_manifest(*manifest) : scan_stems(dir);
  std::sort(stems.begin(), stems.end());
  return stems;
}

BBox parse_box(const std::vector<std::string_view>& fields, std::size_t first,
               const std::string& file, int line) {
  const double cx = parse_coordinate(fields[first], file, line);
  const double cy = parse_coordinate(fields[first + 1], file, line);
  const double w = parse_coordinate(fields[first + 2], file, line);
  const double h = parse_coordinate(fields[first + 3], file, line);
  try {
    return BBox::validated(cx, cy, w, h);
  } catch (const ValidationError& e) {
    throw ParseError(file, line, e.what());
  }
}

void check_class_range(int class_id, const ClassList& classes,
                       const std::string& file, int line) {
  if (!classes.contains(class_id)) {
    throw ParseError(file, line,
                     "class id " + std::to_string(class_id) +
                         " outside class list of size " +
                         std::to_string(classes.size()));
  }
}

std::string format_box(const BBox& box) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %.6f", box.cx, box.cy, box.w,
                box.h);
  return buf;
}

}  // namespace

ClassList::ClassList(std::vector<std::string> names)
    : names_(std::move(names)) {
  if (names_.empty()) {
    throw ValidationError("class list is empty");
  }
  std::set<std::string> seen;
  for (const std::string& name : names_) {
    if (name.empty()) {
      throw ValidationError("class list contains an empty name");
    }
    if (!seen.insert(name).second) {
      throw ValidationError("duplicate class name '" + name + "'");
    }
  }
}

ClassList ClassList::from_file(const fs::path& path) {
  std::vector<std::string> names;
  for (const std::string& raw : read_lines(path)) {
    const std::string name = trim(raw);
    if (!name.empty()) names.push_back(name);
  }
  return ClassList(std::move(names));
}

ClassList ClassList::from_spec(const std::string& spec) {
  if (fs::is_regular_file(spec)) {
    return from_file(spec);
  }
  std::vector<std::string> names;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string name = trim(item);
    if (!name.empty()) names.push_back(name);
  }
  return ClassList(std::move(names));
}

const std::string& ClassList::name(int class_id) const {
  if (!contains(class_id)) {
    throw ValidationError("class id " + std::to_string(class_id) +
                          " outside class list of size " +
                          std::to_string(size()));
  }
  return names_[static_cast<std::size_t>(class_id)];
}

DatasetSplit load_labels(const fs::path& label_dir, const ClassList& classes,
                         const std::optional<fs::path>& manifest) {
  DatasetSplit split;
  split.name = label_dir.filename().string();
  for (const std::string& stem : image_stems(label_dir, manifest)) {
    ImageAnnotations image;
    image.image_id = stem;
    const fs::path file = label_dir / (stem + ".txt");
    if (fs::is_regular_file(file)) {
      const std::string file_name = file.string();
      int line_no = 0;
      for (const std::string& line : read_lines(file)) {
        ++line_no;
        const auto fields = split_fields(line);
        if (fields.empty()) continue;
        if (fields.size() != 5) {
          throw ParseError(file_name, line_no,
                           "expected 5 fields (class cx cy w h), got " +
                               std::to_string(fields.size()));
        }
        const int class_id = parse_class_id(fields[0], file_name, line_no);
        check_class_range(class_id, classes, file_name, line_no);
        GroundTruth gt;
        gt.image_id = stem;
        gt.class_id = class_id;
        gt.box = parse_box(fields, 1, file_name, line_no);
        image.objects.push_back(std::move(gt));
      }
    } else if (!manifest) {
      throw ValidationError("label file disappeared during load: " +
                            file.string());
    }
    split.images.push_back(std::move(image));
  }
  return split;
}

std::vector<ImageDetections> load_predictions(
    const fs::path& pred_dir, const ClassList& classes,
    const std::optional<fs::path>& manifest) {
  std::vector<ImageDetections> images;
  for (const std::string& stem : image_stems(pred_dir, manifest)) {
    ImageDetections image;
    image.image_id = stem;
    const fs::path file = pred_dir / (stem + ".txt");
    if (fs::is_regular_file(file)) {
      const std::string file_name = file.string();
      int line_no = 0;
      for (const std::string& line : read_lines(file)) {
        ++line_no;
        const auto fields = split_fields(line);
        if (fields.empty()) continue;
        if (fields.size() != 6) {
          throw ParseError(
              file_name, line_no,
              "expected 6 fields (class confidence cx cy w h), got " +
                  std::to_string(fields.size()));
        }
        const int class_id = parse_class_id(fields[0], file_name, line_no);
        check_class_range(class_id, classes, file_name, line_no);
        const double confidence =
            parse_coordinate(fields[1], file_name, line_no);
        if (!(confidence >= 0.0 && confidence <= 1.0)) {
          throw ParseError(file_name, line_no,
                           "confidence " + std::string(fields[1]) +
                               " outside [0,1]");
        }
        Detection det;
        det.image_id = stem;
        det.class_id = class_id;
        det.confidence = confidence;
        det.box = parse_box(fields, 2, file_name, line_no);
        image.detections.push_back(std::move(det));
      }
    }
    images.push_back(std::move(image));
  }
  return images;
}

void save_labels(const DatasetSplit& split, const fs::path& label_dir) {
  fs::create_directories(label_dir);
  for (const ImageAnnotations& image : split.images) {
    std::ofstream out(label_dir / (image.image_id + ".txt"));
    if (!out) {
      throw ValidationError("cannot write label file for image '" +
                            image.image_id + "'");
    }
    for (const GroundTruth& gt : image.objects) {
      out << gt.class_id << ' ' << format_box(gt.box) << '\n';
    }
  }
}

void save_predictions(std::span<const ImageDetections> images,
                      const fs::path& pred_dir) {
  fs::create_directories(pred_dir);
  for (const ImageDetections& image : images) {
    std::ofstream out(pred_dir / (image.image_id + ".txt"));
    if (!out) {
      throw ValidationError("cannot write prediction file for image '" +
                            image.image_id + "'");
    }
    char conf[32];
    for (const Detection& det : image.detections) {
      std::snprintf(conf, sizeof(conf), "%.6f", det.confidence);
      out << det.class_id << ' ' << conf << ' ' << format_box(det.box) << '\n';
    }
  }
}

std::vector<std::int64_t> class_histogram(const DatasetSplit& split,
                                          const ClassList& classes) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(classes.size()),
                                   0);
  for (const ImageAnnotations& image : split.images) {
    for (const GroundTruth& gt : image.objects) {
      if (!classes.contains(gt.class_id)) {
        throw ValidationError("ground truth class id " +
                              std::to_string(gt.class_id) +
                              " outside class list");
      }
      ++counts[static_cast<std::size_t>(gt.class_id)];
    }
  }
  return counts;
}

std::vector<GroundTruth> all_ground_truths(const DatasetSplit& split) {
  std::vector<GroundTruth> out;
  for (const ImageAnnotations& image : split.images) {
    out.insert(out.end(), image.objects.begin(), image.objects.end());
  }
  return out;
}

std::vector<Detection> all_detections(
    std::span<const ImageDetections> images) {
  std::vector<Detection> out;
  for (const ImageDetections& image : images) {
    out.insert(out.end(), image.detections.begin(), image.detections.end());
  }
  return out;
}

}  // namespace detkit
