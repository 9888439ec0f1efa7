#include "veinqa/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "veinqa/csv.hpp"
#include "veinqa/errors.hpp"
#include "veinqa/random.hpp"

namespace veinqa {

std::string_view to_string(QualityClass q) noexcept {
  switch (q) {
    case QualityClass::Poor: return "poor";
    case QualityClass::Middle: return "middle";
    case QualityClass::Good: return "good";
  }
  return "";
}

QualityClass parse_quality_class(std::string_view text) {
  if (text == "poor") return QualityClass::Poor;
  if (text == "middle") return QualityClass::Middle;
  if (text == "good") return QualityClass::Good;
  fail(ErrorKind::Validation, "unknown quality class '" + std::string(text) + "'");
}

std::string_view to_string(TraitGroup g) noexcept {
  switch (g) {
    case TraitGroup::FingerDorsal: return "finger-dorsal";
    case TraitGroup::FingerPalmar: return "finger-palmar";
    case TraitGroup::Hand: return "hand";
  }
  return "";
}

TraitGroup parse_trait_group(std::string_view text) {
  if (text == "finger-dorsal") return TraitGroup::FingerDorsal;
  if (text == "finger-palmar") return TraitGroup::FingerPalmar;
  if (text == "hand") return TraitGroup::Hand;
  fail(ErrorKind::Validation, "unknown trait group '" + std::string(text) + "'");
}

// The unit separator cannot appear in sane ids, so keys never collide.
std::string SampleRecord::key() const {
  std::string session_text = std::to_string(session);
  session_text.insert(0, 6 - std::min<std::size_t>(6, session_text.size()), '0');
  return dataset_id + '\x1f' + subject_id + '\x1f' + finger_or_hand_id + '\x1f' + session_text +
         '\x1f' + image_path;
}

std::string SampleRecord::instance_key() const {
  return dataset_id + '\x1f' + subject_id + '\x1f' + finger_or_hand_id;
}

std::string SampleRecord::subject_key() const { return dataset_id + '\x1f' + subject_id; }

DatasetManifest::DatasetManifest(std::vector<SampleRecord> records, TraitGroup trait_group,
                                 std::filesystem::path base_dir)
    : records_(std::move(records)), trait_group_(trait_group), base_dir_(std::move(base_dir)) {
  if (records_.empty()) fail(ErrorKind::Validation, "manifest has no records");
  std::set<std::string> seen;
  for (const auto& r : records_) {
    if (r.session < 1) fail(ErrorKind::Validation, "session must be >= 1 for " + r.image_path);
    if (!seen.insert(r.key()).second) {
      fail(ErrorKind::Validation, "duplicate manifest record for " + r.image_path);
    }
  }
}

std::filesystem::path DatasetManifest::resolve(const SampleRecord& record) const {
  std::filesystem::path p(record.image_path);
  if (p.is_absolute() || base_dir_.empty()) return p;
  return base_dir_ / p;
}

std::vector<std::string> DatasetManifest::dataset_ids() const {
  std::set<std::string> ids;
  for (const auto& r : records_) ids.insert(r.dataset_id);
  return {ids.begin(), ids.end()};
}

DatasetManifest parse_manifest(std::string_view text, TraitGroup trait_group,
                               std::filesystem::path base_dir) {
  const auto rows = csv::parse(text);
  if (rows.empty()) fail(ErrorKind::Parse, "line 1: missing manifest header");
  if (csv::join(rows.front().fields) != kManifestHeader) {
    fail(ErrorKind::Parse, "line " + std::to_string(rows.front().line) +
                               ": unexpected manifest header, want '" +
                               std::string(kManifestHeader) + "'");
  }
  std::vector<SampleRecord> records;
  records.reserve(rows.size() - 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::string where = "line " + std::to_string(row.line) + ": ";
    if (row.fields.size() != 6) {
      fail(ErrorKind::Parse, where + "expected 6 fields, got " + std::to_string(row.fields.size()));
    }
    SampleRecord r;
    r.image_path = row.fields[0];
    r.dataset_id = row.fields[1];
    r.subject_id = row.fields[2];
    r.finger_or_hand_id = row.fields[3];
    if (r.image_path.empty() || r.dataset_id.empty() || r.subject_id.empty() ||
        r.finger_or_hand_id.empty()) {
      fail(ErrorKind::Parse, where + "empty identifier field");
    }
    const std::string& s = row.fields[4];
    const auto res = std::from_chars(s.data(), s.data() + s.size(), r.session);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
      fail(ErrorKind::Parse, where + "session '" + s + "' is not an integer");
    }
    if (r.session < 1) fail(ErrorKind::Validation, where + "session must be >= 1");
    if (!row.fields[5].empty()) {
      try {
        r.quality_class = parse_quality_class(row.fields[5]);
      } catch (const Error& e) {
        fail(ErrorKind::Validation, where + e.what());
      }
    }
    records.push_back(std::move(r));
  }
  return DatasetManifest(std::move(records), trait_group, std::move(base_dir));
}

DatasetManifest load_manifest(const std::filesystem::path& path, TraitGroup trait_group) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_manifest(buf.str(), trait_group, path.parent_path());
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::string out(kManifestHeader);
  out.push_back('\n');
  for (const auto& r : manifest.records()) {
    out += csv::join({r.image_path, r.dataset_id, r.subject_id, r.finger_or_hand_id,
                      std::to_string(r.session),
                      r.quality_class ? std::string(to_string(*r.quality_class)) : std::string()});
    out.push_back('\n');
  }
  return out;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write manifest " + path.string());
  out << format_manifest(manifest);
  if (!out) fail(ErrorKind::Io, "failed writing manifest " + path.string());
}

TrainEvalSplit make_lodo_split(const DatasetManifest& manifest, std::string_view held_out) {
  TrainEvalSplit split;
  split.label = std::string(held_out);
  for (const auto& r : manifest.records()) {
    (r.dataset_id == held_out ? split.eval : split.train).push_back(r);
  }
  if (split.eval.empty()) {
    fail(ErrorKind::NotFound, "dataset '" + std::string(held_out) + "' is not in the manifest");
  }
  return split;
}

std::vector<TrainEvalSplit> make_kfold_splits(const DatasetManifest& manifest, int k,
                                              std::uint64_t seed) {
  if (k < 2) fail(ErrorKind::Input, "k-fold sampling needs k >= 2");
  std::set<std::string> subject_set;
  for (const auto& r : manifest.records()) subject_set.insert(r.subject_key());
  if (subject_set.size() < static_cast<std::size_t>(k)) {
    fail(ErrorKind::Capacity, std::to_string(subject_set.size()) + " subjects cannot fill " +
                                  std::to_string(k) + " folds");
  }
  std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(subjects));
  std::map<std::string, int> fold_of;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    fold_of[subjects[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }

  std::vector<TrainEvalSplit> splits(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) splits[static_cast<std::size_t>(f)].label = "fold" + std::to_string(f);
  for (const auto& r : manifest.records()) {
    const int fold = fold_of.at(r.subject_key());
    for (int f = 0; f < k; ++f) {
      (f == fold ? splits[static_cast<std::size_t>(f)].eval : splits[static_cast<std::size_t>(f)].train)
          .push_back(r);
    }
  }
  return splits;
}

std::vector<SampleRecord> select_labeled(std::span<const SampleRecord> records,
                                         QualityClass wanted, LabelAudit* audit) {
  std::vector<std::string> unlabeled;
  std::vector<SampleRecord> out;
  for (const auto& r : records) {
    if (audit) audit->note(r);
    if (!r.quality_class) {
      unlabeled.push_back(r.image_path);
      continue;
    }
    if (*r.quality_class == wanted) out.push_back(r);
  }
  if (!unlabeled.empty()) {
    std::string names;
    for (std::size_t i = 0; i < unlabeled.size() && i < 5; ++i) {
      if (i) names += ", ";
      names += unlabeled[i];
    }
    if (unlabeled.size() > 5) names += ", ...";
    fail(ErrorKind::Validation, std::to_string(unlabeled.size()) +
                                    " training records have no quality label: " + names);
  }
  return out;
}

}  // namespace veinqa
