#include "memseg/dataset.hpp"

#include <algorithm>
#include <iostream>

#include "memseg/common.hpp"
#include "memseg/image_io.hpp"

namespace fs = std::filesystem;

namespace memseg {
namespace {

std::vector<fs::path> sorted_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

}  // namespace

std::string to_string(Split split) {
  return split == Split::kTrain ? "train" : "test";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "test") return Split::kTest;
  throw Error("unknown split: " + text);
}

std::size_t DatasetIndex::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      items.begin(), items.end(), [label](const DatasetItem& item) { return item.label == label; }));
}

DatasetIndex scan_dataset(const fs::path& root, const std::string& category, Split split) {
  if (!fs::is_directory(root)) {
    throw Error("dataset root not found: " + root.string());
  }
  const fs::path category_dir = root / category;
  if (!fs::is_directory(category_dir)) {
    throw Error("category not found: " + category + " under " + root.string());
  }
  const fs::path split_dir = category_dir / to_string(split);
  if (!fs::is_directory(split_dir)) {
    throw Error("split directory not found: " + split_dir.string());
  }

  DatasetIndex index;
  index.root = root;
  index.category = category;
  index.split = split;

  if (split == Split::kTrain) {
    const fs::path good = split_dir / "good";
    if (!fs::is_directory(good)) {
      throw Error("train/good not found under " + category_dir.string());
    }
    for (auto& path : sorted_images(good)) {
      index.items.push_back({path, Label::kNormal, "good", std::nullopt});
    }
    return index;
  }

  for (const auto& defect_dir : sorted_subdirs(split_dir)) {
    const std::string defect = defect_dir.filename().string();
    const bool normal = defect == "good";
    for (auto& path : sorted_images(defect_dir)) {
      DatasetItem item{path, normal ? Label::kNormal : Label::kAnomalous, defect, std::nullopt};
      if (!normal) {
        const fs::path mask =
            category_dir / "ground_truth" / defect / (path.stem().string() + "_mask.png");
        if (fs::is_regular_file(mask)) {
          item.mask = mask;
        } else {
          std::cerr << "warning: no ground-truth mask for " << path.string()
                    << "; excluded from pixel-level evaluation\n";
          index.missing_masks.push_back(path);
        }
      }
      index.items.push_back(std::move(item));
    }
  }
  std::sort(index.items.begin(), index.items.end(),
            [](const DatasetItem& a, const DatasetItem& b) { return a.image < b.image; });
  return index;
}

DatasetIndex scan_directory(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error("directory not found: " + dir.string());
  }
  DatasetIndex index;
  index.root = dir;
  index.split = Split::kTest;
  for (auto& path : sorted_images(dir)) {
    index.items.push_back({path, Label::kNormal, "good", std::nullopt});
  }
  return index;
}

}  // namespace memseg
