#include <doctest.h>

#include <map>
#include <set>

#include "fixtures.hpp"
#include "veinqa/dataset.hpp"
#include "veinqa/imgproc.hpp"
#include "veinqa/png_io.hpp"
#include "veinqa/recognition.hpp"
#include "veinqa/evaluation.hpp"
#include "veinqa/synthgen.hpp"

using namespace veinqa;

TEST_CASE("generation is a pure function of the parameters") {
  SynthParams p;
  p.seed = 42;
  p.blur_sigma = 1.0;
  p.noise_sigma = 0.02;
  p.jitter_px = 2.0;
  const auto a = generate(p);
  const auto b = generate(p);
  CHECK(a.image == b.image);
  CHECK(a.vessel_mask == b.vessel_mask);
  CHECK(a.band_rows == b.band_rows);
  p.seed = 43;
  CHECK_FALSE(generate(p).image == a.image);
}

TEST_CASE("the neutral degradation chain is the identity") {
  SynthParams p;
  p.seed = 7;
  const auto s = generate(p);
  CHECK(s.image == s.pristine);
  CHECK(s.vessel_mask.size() == s.image.size());
  CHECK(s.image.width() == 128);
  CHECK(s.image.height() == 128);
}

TEST_CASE("vessel pixels are darker than the rest") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SynthParams p;
    p.seed = seed;
    const auto s = generate(p);
    double in = 0.0;
    double out = 0.0;
    std::size_t n_in = 0;
    std::size_t n_out = 0;
    for (std::size_t i = 0; i < s.image.size(); ++i) {
      if (s.vessel_mask[i]) {
        in += s.image.pixels()[i];
        ++n_in;
      } else {
        out += s.image.pixels()[i];
        ++n_out;
      }
    }
    REQUIRE(n_in > 0);
    CHECK(in / n_in < out / n_out - 0.05);
    // Vessels are drawn inside the finger only.
    for (int y = 0; y < p.height; ++y) {
      for (int x = 0; x < p.width; ++x) {
        if (s.vessel_mask[static_cast<std::size_t>(y) * p.width + x]) {
          CHECK(y >= s.band_rows->first);
          CHECK(y <= s.band_rows->second);
        }
      }
    }
  }
}

TEST_CASE("more blur means a smaller mean gradient") {
  for (std::uint64_t seed : {3ull, 4ull}) {
    double prev = 1e9;
    for (double blur : {0.0, 0.5, 1.0, 2.0, 3.0}) {
      SynthParams p;
      p.seed = seed;
      p.blur_sigma = blur;
      const double g = imgproc::mean_gradient_magnitude(generate(p).image.plane());
      CHECK(g < prev);
      prev = g;
    }
  }
}

TEST_CASE("degradations stay inside the unit range and change the image") {
  SynthParams p;
  p.seed = 11;
  p.contrast = 0.5;
  p.noise_sigma = 0.2;
  p.illum_gradient = 0.8;
  const auto s = generate(p);
  for (double v : s.image.pixels()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_FALSE(s.image == s.pristine);
  SynthParams q = p;
  q.noise_sigma = 0.0;
  q.contrast = 1.0;
  q.illum_gradient = 0.5;
  const auto lit = generate(q);
  // Brighter towards the right edge.
  double left = 0.0;
  double right = 0.0;
  for (int y = 0; y < q.height; ++y) {
    left += lit.image(2, y);
    right += lit.image(q.width - 3, y);
  }
  CHECK(right > left);
}

TEST_CASE("samples of one finger share the anatomy") {
  SynthParams a;
  a.seed = 100;
  a.structure_seed = 5;
  a.jitter_px = 0.0;
  SynthParams b = a;
  b.seed = 200;
  CHECK(generate(a).vessel_mask == generate(b).vessel_mask);
  b.structure_seed = 6;
  CHECK_FALSE(generate(a).vessel_mask == generate(b).vessel_mask);
}

TEST_CASE("invalid parameters are named") {
  SynthParams p;
  p.contrast = 0.0;
  try {
    p.validate();
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Validation);
    CHECK(std::string(e.what()).find("contrast") != std::string::npos);
  }
  SynthParams q;
  q.vessel_width = {4.0, 2.0};
  CHECK(fixture::error_kind_of([&] { generate(q); }) == ErrorKind::Validation);
  SynthParams r;
  r.blur_sigma = -1.0;
  CHECK_THROWS_AS(r.validate(), Error);
}

TEST_CASE("corpus plan counts and naming") {
  CorpusSpec spec;
  const auto plan = plan_corpus(spec);
  CHECK(plan.size() == 80);
  std::set<std::string> subjects;
  std::map<QualityClass, int> per_class;
  for (const auto& e : plan) {
    subjects.insert(e.record.subject_key());
    per_class[*e.record.quality_class]++;
  }
  CHECK(subjects.size() == 10);
  CHECK(per_class[QualityClass::Poor] + per_class[QualityClass::Middle] + per_class[QualityClass::Good] == 80);
  for (const auto& [cls, n] : per_class) CHECK((n == 26 || n == 27));
  CHECK(plan.front().record.subject_id == "synth_s001");
  CHECK(plan.front().record.image_path == "synth/synth_s001_f1_1.png");

  std::vector<SampleRecord> recs;
  for (const auto& e : plan) recs.push_back(e.record);
  const DatasetManifest m(recs, spec.trait_group);
  CHECK(make_kfold_splits(m, 10, 1).size() == 10);
}

TEST_CASE("class degradations are drawn from their bands") {
  CorpusSpec spec;
  spec.n_subjects = 6;
  for (const auto& e : plan_corpus(spec)) {
    const auto& band = spec.bands[static_cast<int>(*e.record.quality_class)];
    CHECK(e.params.blur_sigma >= band.blur.lo);
    CHECK(e.params.blur_sigma <= band.blur.hi);
    CHECK(e.params.contrast >= band.contrast.lo);
    CHECK(e.params.contrast <= band.contrast.hi);
    CHECK(e.params.noise_sigma >= band.noise.lo);
    CHECK(e.params.noise_sigma <= band.noise.hi);
    CHECK(e.params.illum_gradient >= band.illum.lo);
    CHECK(e.params.illum_gradient <= band.illum.hi);
  }
}

TEST_CASE("corpus specs parse, validate and round-trip") {
  const auto spec = parse_corpus_spec(R"({"seed": 9, "datasets": ["A", "B"], "n_subjects": 3,
      "class_fractions": {"poor": 0.5, "middle": 0.25, "good": 0.25},
      "bands": {"poor": {"blur": [2, 4]}}})");
  CHECK(spec.seed == 9);
  CHECK(spec.datasets == std::vector<std::string>{"A", "B"});
  CHECK(spec.bands[0].blur == Range{2.0, 4.0});
  CHECK(spec.class_fractions[0] == 0.5);
  const auto again = parse_corpus_spec(format_corpus_spec(spec));
  CHECK(format_corpus_spec(again) == format_corpus_spec(spec));
  CHECK(fixture::error_kind_of([] { parse_corpus_spec(R"({"n_subjectz": 3})"); }) == ErrorKind::Validation);
  CHECK(fixture::error_kind_of([] { parse_corpus_spec("{"); }) == ErrorKind::Parse);
  CHECK(fixture::error_kind_of([] {
          parse_corpus_spec(R"({"class_fractions": {"poor": 0, "middle": 0.5, "good": 0.5}})");
        }) == ErrorKind::Validation);
}

TEST_CASE("corpora are reproducible and written as 8-bit PNGs") {
  CorpusSpec spec;
  spec.n_subjects = 2;
  spec.n_fingers = 1;
  spec.n_samples = 2;
  spec.width = 64;
  spec.height = 64;
  fixture::TempDir a("corpus-a");
  fixture::TempDir b("corpus-b");
  const auto ma = generate_corpus(spec, a.path(), 1);
  const auto mb = generate_corpus(spec, b.path(), 3);
  CHECK(fixture::read_file(a / "manifest.csv") == fixture::read_file(b / "manifest.csv"));
  const auto images = render_corpus(plan_corpus(spec), 2);
  for (std::size_t i = 0; i < ma.size(); ++i) {
    const auto& r = ma.records()[i];
    CHECK(fixture::read_file(ma.resolve(r)) == fixture::read_file(mb.resolve(r)));
    const auto loaded = load_gray_image(ma.resolve(r));
    CHECK(loaded == images[i]);
  }
}

TEST_CASE("unlabeled corpora leave the class empty") {
  CorpusSpec spec;
  spec.n_subjects = 2;
  spec.write_labels = false;
  for (const auto& e : plan_corpus(spec)) CHECK_FALSE(e.record.quality_class.has_value());
}

TEST_CASE("the default corpus is recognisable with MC and Miura") {
  CorpusSpec spec;
  const auto plan = plan_corpus(spec);
  const auto images = render_corpus(plan, 4);
  std::vector<TemplateEntry> entries;
  for (std::size_t i = 0; i < plan.size(); ++i) entries.push_back({plan[i].record, extract_mc(images[i], 2.5)});
  const auto rates = compute_rates(verify_all(entries, VerifyConfig{8, 8, 4}));
  CHECK(rates.eer < 0.1);
}
