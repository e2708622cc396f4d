#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace memseg {

enum class Split { kTrain, kTest };
enum class Label { kNormal = 0, kAnomalous = 1 };

std::string to_string(Split split);
Split parse_split(const std::string& text);

struct DatasetItem {
  std::filesystem::path image;
  Label label = Label::kNormal;
  /// Defect subdirectory name ("good" for normals).
  std::string defect;
  std::optional<std::filesystem::path> mask;
};

/// Listing of one split of an MVTec-style category:
///
///   <root>/<category>/train/good/*.png
///   <root>/<category>/test/<defect>/*.png          ("good" = normal)
///   <root>/<category>/ground_truth/<defect>/<stem>_mask.png
struct DatasetIndex {
  std::filesystem::path root;
  std::string category;
  Split split = Split::kTrain;
  std::vector<DatasetItem> items;
  /// Anomalous test items whose mask file was not found.
  std::vector<std::filesystem::path> missing_masks;

  std::size_t count(Label label) const;
};

/// Lists every image of the split, sorted lexicographically by path.
/// Throws memseg::Error if the root, category or split directory is missing.
DatasetIndex scan_dataset(const std::filesystem::path& root, const std::string& category,
                          Split split);

/// Index over a flat directory of images, all labeled normal. Used for
/// inference inputs and as the normal pool for toy-set generation.
DatasetIndex scan_directory(const std::filesystem::path& dir);

}  // namespace memseg
