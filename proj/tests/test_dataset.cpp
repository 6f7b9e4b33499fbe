#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "neurospect/dataset.hpp"
#include "neurospect/errors.hpp"
#include "neurospect/montage.hpp"
#include "neurospect/synthetic.hpp"
#include "support.hpp"

using namespace neurospect;
using namespace neurospect::dataset;
namespace nt = neurospect::testing;

namespace {

AdapterMap kaggle_adapter() { return AdapterMap::load(nt::source_dir() / "data" / "kaggle_adapter.map"); }

std::string tiny_table(std::size_t rows, bool with_coherence) {
  FeatureSchema schema;
  schema.mode = with_coherence ? FeatureMode::full : FeatureMode::psd_only;
  std::string text = "id,age,sex,education,iq,main.disorder";
  for (const auto& n : schema.feature_names()) text += "," + n;
  text += "\n";
  for (std::size_t r = 0; r < rows; ++r) {
    text += "s" + std::to_string(r) + ",30,F,12,100,Healthy control";
    for (std::size_t k = 0; k < schema.feature_names().size(); ++k) {
      text += "," + std::to_string(0.25 + 0.001 * static_cast<double>(k));
    }
    text += "\n";
  }
  return text;
}

}  // namespace

TEST(Montage, RegionsByPrefix) {
  EXPECT_EQ(electrode_region("Fp1"), Region::frontal);
  EXPECT_EQ(electrode_region("Cz"), Region::central);
  EXPECT_EQ(electrode_region("O2"), Region::occipital);
  EXPECT_EQ(electrode_region("T5"), Region::temporal);
  EXPECT_EQ(electrode_region("Pz"), Region::parietal);
  EXPECT_THROW(electrode_region("X9"), InvalidArgument);
}

TEST(Montage, RegionsPartitionTheMontage) {
  std::map<Region, int> count;
  for (auto e : kMontage) ++count[electrode_region(e)];
  EXPECT_EQ(count[Region::frontal], 7);
  EXPECT_EQ(count[Region::central], 3);
  EXPECT_EQ(count[Region::temporal], 4);
  EXPECT_EQ(count[Region::parietal], 3);
  EXPECT_EQ(count[Region::occipital], 2);
  EXPECT_EQ(kMontage.size(), 19u);
}

TEST(Labels, LexicographicCodesAndParsing) {
  EXPECT_EQ(label_code(parse_label("Addictive disorder")), 0);
  EXPECT_EQ(label_code(parse_label("Anxiety disorder")), 1);
  EXPECT_EQ(parse_label("Obsessive compulsive disorder"), DisorderLabel::obsessive_compulsive);
  EXPECT_EQ(parse_label("Trauma and stress related disorder"), DisorderLabel::trauma_stress);
  EXPECT_EQ(parse_label("healthy_control"), DisorderLabel::healthy_control);
  EXPECT_THROW(parse_label("Unknown disorder"), DataError);
  const auto domain = disorder_domain();
  ASSERT_EQ(domain.size(), kNumClasses);
  EXPECT_TRUE(std::is_sorted(domain.begin(), domain.end()));
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    EXPECT_EQ(label_code(parse_label(label_name(label_from_code(static_cast<int>(c))))),
              static_cast<int>(c));
  }
}

TEST(Schema, CountsAndCanonicalOrder) {
  FeatureSchema full;
  EXPECT_EQ(full.psd_count(), 114u);
  EXPECT_EQ(full.coh_count(), 1026u);
  const auto names = full.feature_names();
  ASSERT_EQ(names.size(), 1140u);
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());
  EXPECT_EQ(names.front(), "psd.delta.Fp1");
  EXPECT_EQ(names[113], "psd.gamma.O2");
  EXPECT_EQ(names[114], "coh.delta.Fp1.Fp2");
  EXPECT_EQ(names.back(), "coh.gamma.O1.O2");

  FeatureSchema psd = full;
  psd.mode = FeatureMode::psd_only;
  EXPECT_EQ(psd.feature_names().size(), 114u);
  EXPECT_NE(psd.fingerprint(), full.fingerprint());
  EXPECT_EQ(full.fingerprint(), FeatureSchema{}.fingerprint());
  EXPECT_EQ(FeatureSchema::from_json(full.to_json()).fingerprint(), full.fingerprint());
}

TEST(Parse, KaggleShapedTableThroughAdapter) {
  const auto text = nt::kaggle_fixture(945);
  const auto header = nt::kaggle_header();
  EXPECT_EQ(header.size(), 1149u);
  const auto data = parse_feature_text(text, FeatureMode::full, kaggle_adapter());
  ASSERT_EQ(data.records.size(), 945u);
  for (const auto& r : data.records) {
    ASSERT_EQ(r.psd.values.size(), 114u);
    ASSERT_TRUE(r.coherence.has_value());
    ASSERT_EQ(r.coherence->values.size(), 1026u);
  }
  EXPECT_EQ(data.records[0].id, "1");
  EXPECT_TRUE(std::isfinite(*data.records[1].demographics.age));
  EXPECT_FALSE(data.records[0].demographics.education.has_value());  // blank cell
  EXPECT_EQ(data.demographic_columns.size(), 4u);
}

TEST(Parse, PsdOnlyTableWith115Columns) {
  const auto text = nt::psd_only_fixture(1792);
  const auto data = parse_feature_text(text, FeatureMode::psd_only);
  ASSERT_EQ(data.records.size(), 1792u);
  for (const auto& r : data.records) {
    EXPECT_FALSE(r.coherence.has_value());
    EXPECT_EQ(r.psd.values.size(), 114u);
  }
  EXPECT_EQ(data.records[4].id, "row-5");
  EXPECT_TRUE(data.demographic_columns.empty());
}

TEST(Parse, MissingLabelColumnNamed) {
  std::string text = tiny_table(2, false);
  text.replace(text.find("main.disorder"), 13, "diagnosis");
  try {
    parse_feature_text(text, FeatureMode::psd_only);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("main.disorder"), std::string::npos);
  }
}

TEST(Parse, WrongFeatureCountForMode) {
  EXPECT_THROW(parse_feature_text(tiny_table(1, false), FeatureMode::full), SchemaError);
  EXPECT_THROW(parse_feature_text(tiny_table(1, true), FeatureMode::psd_only), SchemaError);
}

TEST(Parse, BadNumericCellReportsRowAndColumn) {
  std::string text = tiny_table(3, false);
  const auto pos = text.rfind(",0.250000,");
  text.replace(pos, 9, ",abc");
  try {
    parse_feature_text(text, FeatureMode::psd_only);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("psd.delta.Fp1"), std::string::npos) << msg;
  }
}

TEST(Parse, MissingCellsPreservedAsNaN) {
  std::string text = tiny_table(1, false);
  const auto pos = text.rfind(",0.250000,");
  text.replace(pos, 9, ",NA");
  const auto data = parse_feature_text(text, FeatureMode::psd_only);
  EXPECT_TRUE(std::isnan(data.records[0].psd.values[0]));
}

TEST(Parse, ExtraColumnsIgnoredAndDuplicatesRejected) {
  std::string text = tiny_table(1, false);
  auto nl = text.find('\n');
  std::string with_extra = text;
  with_extra.insert(nl, ",notes");
  with_extra.insert(with_extra.size() - 1, ",hello");
  EXPECT_EQ(parse_feature_text(with_extra, FeatureMode::psd_only).records.size(), 1u);

  std::string dup = text;
  dup.insert(nl, ",age");
  dup.insert(dup.size() - 1, ",30");
  EXPECT_THROW(parse_feature_text(dup, FeatureMode::psd_only), SchemaError);
}

TEST(Parse, DemographicDomainChecked) {
  std::string text = tiny_table(1, false);
  text.replace(text.find(",30,F"), 5, ",130,F");
  EXPECT_THROW(parse_feature_text(text, FeatureMode::psd_only), DataError);
}

TEST(Parse, SerializeRoundTripIsIdentical) {
  const auto data = parse_feature_text(nt::kaggle_fixture(12), FeatureMode::full, kaggle_adapter());
  const auto text = format_feature_table(data);
  const auto again = parse_feature_text(text, FeatureMode::full);
  ASSERT_EQ(again.records.size(), data.records.size());
  EXPECT_EQ(format_feature_table(again), text);
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& a = data.records[i];
    const auto& b = again.records[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.label, b.label);
    EXPECT_EQ(a.demographics.age, b.demographics.age);
    EXPECT_EQ(a.demographics.sex, b.demographics.sex);
    EXPECT_EQ(a.demographics.education, b.demographics.education);
    EXPECT_EQ(a.demographics.iq, b.demographics.iq);
    EXPECT_EQ(a.psd.values, b.psd.values);
    EXPECT_EQ(a.coherence->values, b.coherence->values);
  }
}

TEST(Adapter, ParsesMappingsAndComments) {
  const auto m = AdapterMap::parse("# comment\nA = psd.delta.Fp1\n\n  B=  iq \n");
  EXPECT_EQ(m.map("A"), "psd.delta.Fp1");
  EXPECT_EQ(m.map("B"), "iq");
  EXPECT_EQ(m.map("C"), "C");
  EXPECT_THROW(AdapterMap::parse("nonsense\n"), InvalidArgument);
  EXPECT_EQ(kaggle_adapter().size(), 1142u);
}

TEST(RawEeg, CsvRoundTripAndExtraction) {
  nt::TempDir dir;
  synthetic::CohortConfig cfg = nt::small_cohort(1, 2, 8.0);
  const auto plan = synthetic::plan_cohort(cfg).front();
  const auto window = synthetic::render_subject(plan, cfg);
  write_raw_eeg_csv(dir / "s.csv", window);
  const auto back = read_raw_eeg_csv(dir / "s.csv", cfg.fs);
  EXPECT_EQ(back.n_samples, window.n_samples);
  EXPECT_EQ(back.electrodes, window.electrodes);
  for (std::size_t i = 0; i < window.samples.size(); ++i) {
    ASSERT_EQ(back.samples[i], window.samples[i]);
  }
  const auto rec = record_from_window(back, {}, "s", plan.demographics, plan.label);
  EXPECT_EQ(rec.psd.values.size(), 114u);
  EXPECT_EQ(rec.coherence->values.size(), 1026u);
  for (double v : rec.coherence->values) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(RawEeg, HeaderMustFollowMontage) {
  nt::TempDir dir;
  nt::write_file(dir / "bad.csv", "time,Fp2,Fp1\n0,1,2\n");
  EXPECT_THROW(read_raw_eeg_csv(dir / "bad.csv", 128.0), SchemaError);
}

class TensorTest : public ::testing::Test {
 protected:
  void SetUp() override {
    data_ = parse_feature_text(nt::kaggle_fixture(30), FeatureMode::full, kaggle_adapter());
    std::vector<std::vector<double>> rows;
    for (const auto& r : data_.records) rows.push_back(feature_row(r, data_.schema));
    transform_ = FeatureTransform::fit(rows, data_.schema, data_.demographic_columns, {});
  }
  Dataset data_;
  FeatureTransform transform_;
};

TEST_F(TensorTest, AblationZeroesOffDiagonal) {
  const auto t = assemble_tensor(data_.records[0], false, transform_);
  for (std::size_t b = 0; b < t.n_bands; ++b) {
    for (std::size_t i = 0; i < 19; ++i) {
      for (std::size_t j = 0; j < 19; ++j) {
        if (i != j) ASSERT_EQ(t.at(b, i, j), 0.0);
      }
    }
  }
}

TEST_F(TensorTest, SymmetricWithCoherenceOnOffDiagonal) {
  const auto& rec = data_.records[3];
  const auto t = assemble_tensor(rec, true, transform_);
  ASSERT_EQ(t.grid.size(), 6u * 19 * 19);
  for (std::size_t b = 0; b < 6; ++b) {
    for (std::size_t i = 0; i < 19; ++i) {
      for (std::size_t j = 0; j < 19; ++j) {
        ASSERT_EQ(t.at(b, i, j), t.at(b, j, i));
        if (i != j) ASSERT_EQ(t.at(b, i, j), rec.coherence->at(b, i, j));
      }
    }
  }
}

TEST_F(TensorTest, DiagonalCarriesScaledLogPower) {
  const auto& rec = data_.records[5];
  const auto t = assemble_tensor(rec, true, transform_);
  const auto scaled = transform_.apply(feature_row(rec, data_.schema));
  std::size_t diag = 0;
  for (std::size_t b = 0; b < 6; ++b) {
    for (std::size_t c = 0; c < 19; ++c) {
      EXPECT_DOUBLE_EQ(t.at(b, c, c), scaled[kDemographicCount + b * 19 + c]);
      ++diag;
    }
  }
  EXPECT_EQ(diag, 114u);
  // Z-scored power over the training rows: mean 0.
  double mean = 0;
  for (const auto& r : data_.records) mean += assemble_tensor(r, false, transform_).at(2, 4, 4);
  EXPECT_NEAR(mean / static_cast<double>(data_.records.size()), 0.0, 1e-9);
  for (double d : t.demographics) {
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
}

TEST_F(TensorTest, CoherenceRequiredWhenRequested) {
  auto rec = data_.records[0];
  rec.coherence.reset();
  EXPECT_THROW(assemble_tensor(rec, true, transform_), InvalidArgument);
  EXPECT_NO_THROW(assemble_tensor(rec, false, transform_));
}

TEST_F(TensorTest, FeatureRowLayout) {
  const auto& rec = data_.records[1];
  const auto row = feature_row(rec, data_.schema);
  EXPECT_EQ(row.size(), feature_row_width(data_.schema));
  EXPECT_EQ(row.size(), 4u + 114 + 1026);
  EXPECT_EQ(row[1], 1.0);  // row index 1 is male in the fixture
  EXPECT_DOUBLE_EQ(row[4], std::log10(rec.psd.values[0]));
  EXPECT_EQ(row[4 + 114], rec.coherence->values[0]);
}

TEST(Summary, CountsHistogramsAndRegions) {
  auto cfg = nt::small_cohort(100, 3, 4.0);
  cfg.extraction.welch.segment_len = 128;
  const auto data = synthetic::synthesize_cohort(cfg);
  const auto s = summarize_dataset(data);
  EXPECT_EQ(s.n_records, 300u);
  ASSERT_EQ(s.class_counts.size(), 3u);
  for (const auto& [label, n] : s.class_counts) EXPECT_EQ(n, 100u) << label;
  std::size_t age_total = s.age_hist.missing;
  for (auto c : s.age_hist.counts) age_total += c;
  EXPECT_EQ(age_total, 300u);
  EXPECT_EQ(s.age_hist.edges.front(), 0.0);
  EXPECT_EQ(s.age_hist.edges.back(), 120.0);
  EXPECT_EQ(s.band_region_power.size(), 6u);
  for (const auto& [band, regions] : s.band_region_power) EXPECT_EQ(regions.size(), 5u) << band;
  EXPECT_EQ(s.exemplars.size(), 3u);
  const auto j = s.to_json();
  for (const char* key : {"class_counts", "age_hist", "iq_hist", "sex_by_class", "band_region_power"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

TEST(Summary, SingleRecordHasUnitMass) {
  Dataset data = parse_feature_text(nt::kaggle_fixture(1), FeatureMode::full, kaggle_adapter());
  data.records[0].demographics.iq = 101;
  data.records[0].demographics.education = 12;
  const auto s = summarize_dataset(data);
  for (const auto* h : {&s.age_hist, &s.iq_hist, &s.education_hist}) {
    double mass = 0;
    for (double f : h->fractions()) mass += f;
    EXPECT_DOUBLE_EQ(mass, 1.0);
  }
  EXPECT_THROW(summarize_dataset(Dataset{}), InvalidArgument);
}

TEST(Histogram, ClampsToEndBinsAndCountsMissing) {
  Histogram h;
  h.edges = {0, 10, 20};
  h.counts = {0, 0};
  h.add(-5.0);
  h.add(25.0);
  h.add(20.0);
  h.add(std::nullopt);
  EXPECT_EQ(h.counts[0], 1u);
  EXPECT_EQ(h.counts[1], 2u);
  EXPECT_EQ(h.missing, 1u);
}
