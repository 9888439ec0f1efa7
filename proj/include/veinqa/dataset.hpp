#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace veinqa {

enum class QualityClass { Poor = 0, Middle = 1, Good = 2 };

std::string_view to_string(QualityClass q) noexcept;
/// Accepts the manifest spellings poor/middle/good; anything else is a
/// validation error.
QualityClass parse_quality_class(std::string_view text);

enum class TraitGroup { FingerDorsal, FingerPalmar, Hand };

std::string_view to_string(TraitGroup g) noexcept;
TraitGroup parse_trait_group(std::string_view text);

struct SampleRecord {
  std::string image_path;
  std::string dataset_id;
  std::string subject_id;
  std::string finger_or_hand_id;
  int session = 1;
  std::optional<QualityClass> quality_class;

  /// Canonical unique key, used for deterministic ordering and tie breaks.
  std::string key() const;
  /// Identity of the biometric instance (finger or hand).
  std::string instance_key() const;
  /// Identity of the person; subject ids are scoped by dataset.
  std::string subject_key() const;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

class DatasetManifest {
 public:
  DatasetManifest(std::vector<SampleRecord> records, TraitGroup trait_group,
                  std::filesystem::path base_dir = {});

  const std::vector<SampleRecord>& records() const noexcept { return records_; }
  TraitGroup trait_group() const noexcept { return trait_group_; }
  /// Directory relative image paths are resolved against.
  const std::filesystem::path& base_dir() const noexcept { return base_dir_; }
  std::filesystem::path resolve(const SampleRecord& record) const;

  /// Sorted distinct dataset ids.
  std::vector<std::string> dataset_ids() const;
  std::size_t size() const noexcept { return records_.size(); }

 private:
  std::vector<SampleRecord> records_;
  TraitGroup trait_group_;
  std::filesystem::path base_dir_;
};

struct TrainEvalSplit {
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> eval;
  std::string label;
};

inline constexpr std::string_view kManifestHeader =
    "image_path,dataset_id,subject_id,finger_or_hand_id,session,quality_class";

DatasetManifest parse_manifest(std::string_view text, TraitGroup trait_group,
                               std::filesystem::path base_dir = {});
DatasetManifest load_manifest(const std::filesystem::path& path,
                              TraitGroup trait_group = TraitGroup::FingerPalmar);
std::string format_manifest(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

TrainEvalSplit make_lodo_split(const DatasetManifest& manifest, std::string_view held_out);
std::vector<TrainEvalSplit> make_kfold_splits(const DatasetManifest& manifest, int k,
                                              std::uint64_t seed);

/// Records every label read made through select_labeled(); used to prove a
/// training run never looked at held-out labels.
class LabelAudit {
 public:
  void note(const SampleRecord& record) { keys_.push_back(record.key()); }
  const std::vector<std::string>& keys() const noexcept { return keys_; }

 private:
  std::vector<std::string> keys_;
};

/// Returns the records of the wanted class. Every record must carry a label;
/// unlabeled records raise a validation error naming them.
std::vector<SampleRecord> select_labeled(std::span<const SampleRecord> records,
                                         QualityClass wanted, LabelAudit* audit = nullptr);

}  // namespace veinqa
