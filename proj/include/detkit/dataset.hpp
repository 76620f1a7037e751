#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detkit/types.hpp"

namespace detkit {

/// Ordered category names. The index of a name is its class id; the ordering
/// is always user-supplied configuration, never assumed.
class ClassList {
 public:
  ClassList() = default;
  explicit ClassList(std::vector<std::string> names);

  /// One name per line; blank lines ignored.
  static ClassList from_file(const std::filesystem::path& path);

  /// Accepts either a path to a class file or a comma-separated list.
  static ClassList from_spec(const std::string& spec);

  int size() const { return static_cast<int>(names_.size()); }
  bool contains(int class_id) const {
    return class_id >= 0 && class_id < size();
  }
  const std::string& name(int class_id) const;
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

struct ImageAnnotations {
  std::string image_id;
  std::vector<GroundTruth> objects;
};

struct ImageDetections {
  std::string image_id;
  std::vector<Detection> detections;
};

/// One dataset split: images sorted by id, each with its ground truths.
struct DatasetSplit {
  std::string name;
  std::vector<ImageAnnotations> images;
};

/// Loads YOLO-format label files (`class cx cy w h` per line) from a
/// directory, one text file per image, the file stem being the image id.
/// With a manifest (one stem per line) exactly those stems are loaded and a
/// missing file means an image with zero instances. Parse and validation
/// failures throw ParseError with file, line, and offending token.
DatasetSplit load_labels(const std::filesystem::path& label_dir,
                         const ClassList& classes,
                         const std::optional<std::filesystem::path>& manifest =
                             std::nullopt);

/// Same layout with confidence inserted as field 2:
/// `class confidence cx cy w h`. A missing prediction file is an image with
/// zero detections, never an error.
std::vector<ImageDetections> load_predictions(
    const std::filesystem::path& pred_dir, const ClassList& classes,
    const std::optional<std::filesystem::path>& manifest = std::nullopt);

/// Writes label files back out, coordinates at 6 decimal places.
void save_labels(const DatasetSplit& split,
                 const std::filesystem::path& label_dir);

void save_predictions(std::span<const ImageDetections> images,
                      const std::filesystem::path& pred_dir);

/// Instance count per class id; zero-instance classes included with count 0.
std::vector<std::int64_t> class_histogram(const DatasetSplit& split,
                                          const ClassList& classes);

std::vector<GroundTruth> all_ground_truths(const DatasetSplit& split);
std::vector<Detection> all_detections(std::span<const ImageDetections> images);

}  // namespace detkit
