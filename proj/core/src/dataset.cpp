#include "neurospect/dataset.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "neurospect/csv.hpp"
#include "neurospect/errors.hpp"

namespace neurospect::dataset {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kPowerFloor = 1e-12;

constexpr std::array<std::string_view, kNumClasses> kLabelNames = {
    "Addictive disorder",
    "Anxiety disorder",
    "Healthy control",
    "Mood disorder",
    "Obsessive-compulsive disorder",
    "Schizophrenia",
    "Trauma and stress related disorder",
};

std::string normalize_label(std::string_view s) {
  std::string out;
  for (char c : s) {
    const auto u = static_cast<unsigned char>(c);
    if (c == '-' || c == '_') c = ' ';
    if (c == ' ' && (out.empty() || out.back() == ' ')) continue;
    out.push_back(static_cast<char>(std::tolower(u == '-' ? ' ' : c)));
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_missing_cell(const std::string& cell) {
  const auto l = lower(cell);
  return l.empty() || l == "na" || l == "nan" || l == "null";
}

// Returns NaN for a missing cell; throws DataError naming row and column on
// unparseable text.
double parse_number(const std::string& raw, std::size_t row, const std::string& column) {
  const auto cell = trim(raw);
  if (is_missing_cell(cell)) return kNaN;
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
    throw DataError("row " + std::to_string(row) + ", column '" + column +
                    "': cannot parse numeric value '" + cell + "'");
  }
  return v;
}

std::string sha256_hex(std::string_view text) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, text.data(), text.size());
  EVP_DigestFinal_ex(ctx, digest.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::optional<double> opt(double v) {
  if (std::isnan(v)) return std::nullopt;
  return v;
}

Histogram make_hist(double lo, double hi, double step) {
  Histogram h;
  for (double e = lo; e <= hi + 1e-9; e += step) h.edges.push_back(e);
  h.counts.assign(h.edges.size() - 1, 0);
  return h;
}

}  // namespace

std::string_view label_name(DisorderLabel label) {
  const auto code = static_cast<std::size_t>(label);
  if (code >= kLabelNames.size()) throw DataError("invalid label code");
  return kLabelNames[code];
}

DisorderLabel parse_label(std::string_view text) {
  const auto key = normalize_label(trim(text));
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (normalize_label(kLabelNames[i]) == key) return static_cast<DisorderLabel>(i);
  }
  throw DataError("unknown disorder label '" + std::string(text) + "'");
}

std::vector<std::string> disorder_domain() { return {kLabelNames.begin(), kLabelNames.end()}; }

std::string_view sex_name(Sex s) { return s == Sex::female ? "female" : "male"; }

Sex parse_sex(std::string_view text) {
  const auto l = lower(trim(text));
  if (l == "m" || l == "male") return Sex::male;
  if (l == "f" || l == "female") return Sex::female;
  throw DataError("unknown sex value '" + std::string(text) + "'");
}

void Demographics::validate() const {
  if (age && !(*age > 0.0 && *age <= 120.0)) {
    throw DataError("age " + std::to_string(*age) + " outside (0, 120]");
  }
  if (education && !(*education >= 0.0)) throw DataError("education must be non-negative");
  if (iq && !(*iq > 0.0 && *iq <= 250.0)) {
    throw DataError("iq " + std::to_string(*iq) + " outside (0, 250]");
  }
}

std::string_view mode_name(FeatureMode m) { return m == FeatureMode::full ? "full" : "psd_only"; }

FeatureMode parse_mode(std::string_view text) {
  if (text == "full") return FeatureMode::full;
  if (text == "psd_only") return FeatureMode::psd_only;
  throw InvalidArgument("unknown feature mode '" + std::string(text) + "'");
}

std::string psd_feature_name(std::string_view band, std::string_view electrode) {
  return "psd." + std::string(band) + "." + std::string(electrode);
}

std::string coh_feature_name(std::string_view band, std::string_view e1, std::string_view e2) {
  return "coh." + std::string(band) + "." + std::string(e1) + "." + std::string(e2);
}

std::size_t FeatureSchema::coh_count() const {
  if (mode == FeatureMode::psd_only) return 0;
  return bands.size() * spectral::CoherenceTensor::pair_count(electrodes.size());
}

std::vector<std::string> FeatureSchema::psd_names() const {
  std::vector<std::string> out;
  for (const auto& b : bands) {
    for (const auto& e : electrodes) out.push_back(psd_feature_name(b.name, e));
  }
  return out;
}

std::vector<std::string> FeatureSchema::coh_names() const {
  std::vector<std::string> out;
  if (mode == FeatureMode::psd_only) return out;
  for (const auto& b : bands) {
    for (std::size_t i = 0; i < electrodes.size(); ++i) {
      for (std::size_t j = i + 1; j < electrodes.size(); ++j) {
        out.push_back(coh_feature_name(b.name, electrodes[i], electrodes[j]));
      }
    }
  }
  return out;
}

std::vector<std::string> FeatureSchema::feature_names() const {
  auto out = psd_names();
  auto coh = coh_names();
  out.insert(out.end(), coh.begin(), coh.end());
  return out;
}

std::string FeatureSchema::fingerprint() const {
  std::ostringstream ss;
  ss << "mode=" << mode_name(mode) << "\n";
  for (const auto& b : bands) {
    ss << "band=" << b.name << ":" << csv::format_double(b.lo) << ":" << csv::format_double(b.hi)
       << "\n";
  }
  for (const auto& n : feature_names()) ss << n << "\n";
  return sha256_hex(ss.str());
}

nlohmann::json FeatureSchema::to_json() const {
  nlohmann::json bj = nlohmann::json::array();
  for (const auto& b : bands) bj.push_back({{"name", b.name}, {"lo", b.lo}, {"hi", b.hi}});
  return {{"mode", mode_name(mode)}, {"bands", bj}, {"electrodes", electrodes}};
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
  FeatureSchema s;
  s.mode = parse_mode(j.at("mode").get<std::string>());
  s.bands.clear();
  for (const auto& b : j.at("bands")) {
    s.bands.push_back({b.at("name").get<std::string>(), b.at("lo").get<double>(),
                       b.at("hi").get<double>()});
  }
  spectral::validate_bands(s.bands);
  s.electrodes = j.at("electrodes").get<std::vector<std::string>>();
  return s;
}

AdapterMap AdapterMap::parse(std::string_view text) {
  AdapterMap m;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("adapter map line " + std::to_string(lineno) + ": expected 'a = b'");
    }
    auto key = trim(t.substr(0, eq));
    auto value = trim(t.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw InvalidArgument("adapter map line " + std::to_string(lineno) + ": empty name");
    }
    m.map_[key] = value;
  }
  return m;
}

AdapterMap AdapterMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open adapter map '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string AdapterMap::map(const std::string& external) const {
  const auto it = map_.find(external);
  return it == map_.end() ? external : it->second;
}

Dataset parse_feature_table(const std::filesystem::path& path, FeatureMode mode,
                            const AdapterMap& adapter, std::vector<spectral::FrequencyBand> bands) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open feature table '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_feature_text(ss.str(), mode, adapter, std::move(bands));
}

Dataset parse_feature_text(std::string_view text, FeatureMode mode, const AdapterMap& adapter,
                           std::vector<spectral::FrequencyBand> bands) {
  spectral::validate_bands(bands);
  const auto table = csv::parse(text);

  Dataset data;
  data.schema.mode = mode;
  data.schema.bands = std::move(bands);
  const auto& schema = data.schema;

  std::map<std::string, std::size_t> column;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const auto name = adapter.map(trim(table.header[c]));
    if (name.empty()) continue;
    if (!column.emplace(name, c).second) {
      throw SchemaError("duplicate column '" + name + "'");
    }
  }
  auto find = [&](std::string_view name) -> std::optional<std::size_t> {
    const auto it = column.find(std::string(name));
    if (it == column.end()) return std::nullopt;
    return it->second;
  };

  const auto label_col = find(kLabelColumn);
  if (!label_col) throw SchemaError("missing required column '" + std::string(kLabelColumn) + "'");

  const auto psd_names = schema.psd_names();
  // Coherence names are always computed so that psd_only mode can detect them.
  FeatureSchema full_schema = schema;
  full_schema.mode = FeatureMode::full;
  const auto coh_names = full_schema.coh_names();

  std::vector<std::size_t> psd_cols;
  std::vector<std::string> missing;
  for (const auto& n : psd_names) {
    if (auto c = find(n)) {
      psd_cols.push_back(*c);
    } else {
      missing.push_back(n);
    }
  }
  std::vector<std::size_t> coh_cols;
  std::size_t coh_found = 0;
  for (const auto& n : coh_names) {
    if (auto c = find(n)) {
      coh_cols.push_back(*c);
      ++coh_found;
    } else if (mode == FeatureMode::full) {
      missing.push_back(n);
    }
  }
  if (mode == FeatureMode::psd_only && coh_found > 0) {
    throw SchemaError("wrong feature count for mode psd_only: found " + std::to_string(coh_found) +
                      " coherence columns (expected 0)");
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < std::min<std::size_t>(missing.size(), 5); ++i) {
      list += (i ? ", " : "") + missing[i];
    }
    throw SchemaError("wrong feature count for mode " + std::string(mode_name(mode)) + ": " +
                      std::to_string(missing.size()) + " required feature columns missing (" +
                      list + (missing.size() > 5 ? ", ..." : "") + ")");
  }

  std::array<std::optional<std::size_t>, kDemographicCount> demo_cols;
  for (std::size_t d = 0; d < kDemographicCount; ++d) {
    demo_cols[d] = find(kDemographicColumns[d]);
    if (demo_cols[d]) data.demographic_columns.emplace_back(kDemographicColumns[d]);
  }
  const auto id_col = find(kIdColumn);

  const std::size_t n_bands = schema.bands.size();
  const std::size_t n_ch = schema.electrodes.size();
  const std::size_t pairs = spectral::CoherenceTensor::pair_count(n_ch);

  data.records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t rowno = r + 1;
    if (row.size() > table.header.size()) {
      throw DataError("row " + std::to_string(rowno) + " has more fields than the header");
    }
    auto cell = [&](std::size_t c) -> std::string {
      return c < row.size() ? row[c] : std::string();
    };
    SubjectRecord rec;
    rec.id = id_col ? trim(cell(*id_col)) : std::string();
    if (rec.id.empty()) rec.id = "row-" + std::to_string(rowno);

    const auto label_text = trim(cell(*label_col));
    try {
      rec.label = parse_label(label_text);
    } catch (const DataError& e) {
      throw DataError("row " + std::to_string(rowno) + ", column 'main.disorder': " + e.what());
    }

    try {
      if (demo_cols[0]) rec.demographics.age = opt(parse_number(cell(*demo_cols[0]), rowno, "age"));
      if (demo_cols[1]) {
        const auto s = trim(cell(*demo_cols[1]));
        if (!is_missing_cell(s)) rec.demographics.sex = parse_sex(s);
      }
      if (demo_cols[2]) {
        rec.demographics.education = opt(parse_number(cell(*demo_cols[2]), rowno, "education"));
      }
      if (demo_cols[3]) rec.demographics.iq = opt(parse_number(cell(*demo_cols[3]), rowno, "iq"));
      rec.demographics.validate();
    } catch (const DataError& e) {
      const std::string msg = e.what();
      if (msg.starts_with("row ")) throw;
      throw DataError("row " + std::to_string(rowno) + ": " + msg);
    }

    rec.psd.n_bands = n_bands;
    rec.psd.n_channels = n_ch;
    rec.psd.values.resize(n_bands * n_ch);
    for (std::size_t f = 0; f < psd_cols.size(); ++f) {
      rec.psd.values[f] = parse_number(cell(psd_cols[f]), rowno, psd_names[f]);
    }
    if (mode == FeatureMode::full) {
      spectral::CoherenceTensor coh;
      coh.n_bands = n_bands;
      coh.n_channels = n_ch;
      coh.values.resize(n_bands * pairs);
      for (std::size_t f = 0; f < coh_cols.size(); ++f) {
        coh.values[f] = parse_number(cell(coh_cols[f]), rowno, coh_names[f]);
      }
      rec.coherence = std::move(coh);
    }
    data.records.push_back(std::move(rec));
  }
  return data;
}

std::string format_feature_table(const Dataset& data) {
  const auto names = data.schema.feature_names();
  std::ostringstream out;
  out << kIdColumn;
  for (const auto& d : data.demographic_columns) out << "," << d;
  out << "," << kLabelColumn;
  for (const auto& n : names) out << "," << n;
  out << "\n";
  auto num = [](std::optional<double> v) { return v ? csv::format_double(*v) : std::string(); };
  auto val = [](double v) { return std::isnan(v) ? std::string() : csv::format_double(v); };
  for (const auto& r : data.records) {
    out << csv::escape(r.id);
    for (const auto& d : data.demographic_columns) {
      out << ",";
      if (d == "age") out << num(r.demographics.age);
      if (d == "sex" && r.demographics.sex) out << sex_name(*r.demographics.sex);
      if (d == "education") out << num(r.demographics.education);
      if (d == "iq") out << num(r.demographics.iq);
    }
    out << "," << csv::escape(label_name(r.label));
    for (double v : r.psd.values) out << "," << val(v);
    if (data.schema.mode == FeatureMode::full) {
      if (!r.coherence) throw InvalidArgument("record '" + r.id + "' lacks coherence features");
      for (double v : r.coherence->values) out << "," << val(v);
    }
    out << "\n";
  }
  return out.str();
}

void write_feature_table(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << format_feature_table(data);
}

spectral::SampledWindow read_raw_eeg_csv(const std::filesystem::path& path, double fs) {
  const auto table = csv::read_file(path);
  if (table.header.empty() || lower(trim(table.header.front())) != "time") {
    throw SchemaError("raw EEG CSV must start with a 'time' column");
  }
  if (table.header.size() != kMontage.size() + 1) {
    throw SchemaError("raw EEG CSV must contain the 19 montage electrodes");
  }
  spectral::SampledWindow w;
  w.fs = fs;
  for (std::size_t c = 1; c < table.header.size(); ++c) {
    const auto name = trim(table.header[c]);
    if (electrode_index(name) != c - 1) {
      throw SchemaError("raw EEG column '" + name + "' is not in canonical montage order");
    }
    w.electrodes.emplace_back(kMontage[c - 1]);
  }
  w.n_channels = w.electrodes.size();
  w.n_samples = table.rows.size();
  w.samples.reserve(w.n_samples * w.n_channels);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw DataError("raw EEG row " + std::to_string(r + 1) + " has the wrong field count");
    }
    for (std::size_t c = 1; c < row.size(); ++c) {
      const double v = parse_number(row[c], r + 1, w.electrodes[c - 1]);
      if (std::isnan(v)) {
        throw DataError("raw EEG row " + std::to_string(r + 1) + " has a missing sample");
      }
      w.samples.push_back(v);
    }
  }
  spectral::validate_window(w);
  return w;
}

void write_raw_eeg_csv(const std::filesystem::path& path, const spectral::SampledWindow& window) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out << "time";
  for (const auto& e : window.electrodes) out << "," << e;
  out << "\n";
  for (std::size_t i = 0; i < window.n_samples; ++i) {
    out << csv::format_double(static_cast<double>(i) / window.fs);
    for (std::size_t c = 0; c < window.n_channels; ++c) {
      out << "," << csv::format_double(window.at(i, c));
    }
    out << "\n";
  }
}

SubjectRecord record_from_window(const spectral::SampledWindow& window,
                                 const ExtractionConfig& cfg, std::string id,
                                 Demographics demographics, DisorderLabel label) {
  if (window.electrodes.size() != kMontage.size()) {
    throw InvalidArgument("feature extraction expects the 19-electrode montage");
  }
  for (std::size_t c = 0; c < window.electrodes.size(); ++c) {
    if (electrode_index(window.electrodes[c]) != c) {
      throw InvalidArgument("window electrodes are not in canonical montage order");
    }
  }
  demographics.validate();
  SubjectRecord rec;
  rec.id = std::move(id);
  rec.demographics = demographics;
  rec.label = label;
  rec.psd = spectral::band_powers(spectral::welch_psd(window, cfg.welch), cfg.bands);
  if (cfg.mode == FeatureMode::full) {
    rec.coherence = spectral::msc_coherence(window, cfg.welch, cfg.bands);
  }
  return rec;
}

std::size_t feature_row_width(const FeatureSchema& schema) {
  return kDemographicCount + schema.psd_count() + schema.coh_count();
}

std::vector<double> feature_row(const SubjectRecord& record, const FeatureSchema& schema) {
  if (record.psd.values.size() != schema.psd_count()) {
    throw SchemaError("record '" + record.id + "' has " + std::to_string(record.psd.values.size()) +
                      " PSD features; schema expects " + std::to_string(schema.psd_count()));
  }
  std::vector<double> row;
  row.reserve(feature_row_width(schema));
  const auto& d = record.demographics;
  row.push_back(d.age.value_or(kNaN));
  row.push_back(d.sex ? (*d.sex == Sex::male ? 1.0 : 0.0) : kNaN);
  row.push_back(d.education.value_or(kNaN));
  row.push_back(d.iq.value_or(kNaN));
  for (double p : record.psd.values) {
    row.push_back(std::isnan(p) ? kNaN : std::log10(std::max(p, kPowerFloor)));
  }
  if (schema.mode == FeatureMode::full) {
    if (record.coherence) {
      if (record.coherence->values.size() != schema.coh_count()) {
        throw SchemaError("record '" + record.id + "' has the wrong coherence feature count");
      }
      row.insert(row.end(), record.coherence->values.begin(), record.coherence->values.end());
    } else {
      row.resize(feature_row_width(schema), kNaN);
    }
  }
  return row;
}

FeatureTransform FeatureTransform::fit(const std::vector<std::vector<double>>& train_rows,
                                       const FeatureSchema& schema,
                                       const std::vector<std::string>& demographic_columns,
                                       const preprocess::PreprocessConfig& cfg) {
  if (train_rows.empty()) throw InvalidArgument("cannot fit a feature transform on zero rows");
  const std::size_t width = feature_row_width(schema);
  for (const auto& r : train_rows) {
    if (r.size() != width) throw ShapeError("feature row width does not match schema");
  }
  FeatureTransform t;
  t.schema_ = schema;
  t.outlier_action_ = cfg.outliers.action;
  t.fences_.assign(width, std::nullopt);
  t.fill_.assign(width, 0.0);
  t.power_scaler_ = preprocess::ScalerParams(cfg.scale);
  t.fitted_rows_ = train_rows.size();

  std::array<bool, kDemographicCount> present{};
  for (std::size_t d = 0; d < kDemographicCount; ++d) {
    present[d] = std::find(demographic_columns.begin(), demographic_columns.end(),
                           kDemographicColumns[d]) != demographic_columns.end();
  }
  auto column = [&](std::size_t c) {
    std::vector<double> v;
    v.reserve(train_rows.size());
    for (const auto& r : train_rows) v.push_back(r[c]);
    return v;
  };

  // Outlier fences on numeric demographics (and optionally band power).
  const std::size_t power_end = kDemographicCount + schema.psd_count();
  for (std::size_t c = 0; c < power_end; ++c) {
    const bool demo = c < kDemographicCount;
    if (demo && (c == 1 || !present[c])) continue;
    if (!demo && !cfg.outliers_on_eeg) continue;
    const auto values = column(c);
    const auto observed = std::count_if(values.begin(), values.end(),
                                        [](double v) { return !std::isnan(v); });
    if (observed >= 2) t.fences_[c] = preprocess::fit_outlier_fences(values, cfg.outliers);
  }

  std::vector<std::vector<double>> treated = train_rows;
  for (std::size_t c = 0; c < width; ++c) {
    if (!t.fences_[c]) continue;
    const auto res = preprocess::apply_outlier_fences(column(c), *t.fences_[c], t.outlier_action_);
    for (std::size_t r = 0; r < treated.size(); ++r) treated[r][c] = res.treated[r];
  }

  for (std::size_t c = 0; c < width; ++c) {
    if (c < kDemographicCount && !present[c]) continue;
    std::vector<double> values;
    values.reserve(treated.size());
    for (const auto& r : treated) values.push_back(r[c]);
    if (c == 1) {
      std::vector<std::optional<std::string>> cats;
      for (double v : values) {
        if (std::isnan(v)) {
          cats.emplace_back(std::nullopt);
        } else {
          cats.emplace_back(std::string(sex_name(v >= 0.5 ? Sex::male : Sex::female)));
        }
      }
      t.fill_[c] = preprocess::mode_of_observed(cats) == "male" ? 1.0 : 0.0;
    } else {
      try {
        t.fill_[c] = preprocess::mean_of_observed(values);
      } catch (const DataError&) {
        throw DataError("feature column " + std::to_string(c) + " is missing in every training row");
      }
    }
  }

  std::vector<std::vector<double>> demo_rows;
  std::vector<std::vector<double>> power_rows;
  for (auto& r : treated) {
    for (std::size_t c = 0; c < width; ++c) {
      if (std::isnan(r[c])) r[c] = t.fill_[c];
    }
    demo_rows.emplace_back(r.begin(), r.begin() + kDemographicCount);
    power_rows.emplace_back(r.begin() + kDemographicCount, r.begin() + static_cast<std::ptrdiff_t>(power_end));
  }
  t.demographic_scaler_.fit(demo_rows);
  t.power_scaler_.fit(power_rows);
  return t;
}

std::vector<double> FeatureTransform::clean(std::span<const double> row) const {
  if (row.size() != fill_.size()) throw ShapeError("feature row width does not match transform");
  std::vector<double> out(row.begin(), row.end());
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (fences_[c] && !std::isnan(out[c])) {
      const auto& f = *fences_[c];
      if (out[c] < f.lo || out[c] > f.hi) {
        if (outlier_action_ == preprocess::OutlierPolicy::Action::mark_missing) {
          out[c] = kNaN;
        } else {
          out[c] = out[c] < f.lo ? f.lo : f.hi;
        }
      }
    }
    if (std::isnan(out[c])) out[c] = fill_[c];
  }
  return out;
}

std::vector<double> FeatureTransform::apply(std::span<const double> row) const {
  auto out = clean(row);
  demographic_scaler_.apply_in_place(std::span(out).subspan(0, kDemographicCount));
  power_scaler_.apply_in_place(std::span(out).subspan(kDemographicCount, schema_.psd_count()));
  return out;
}

nlohmann::json FeatureTransform::to_json() const {
  nlohmann::json fences = nlohmann::json::array();
  for (const auto& f : fences_) {
    if (f) {
      fences.push_back({f->lo, f->hi});
    } else {
      fences.push_back(nullptr);
    }
  }
  return {{"schema", schema_.to_json()},
          {"outlier_action",
           outlier_action_ == preprocess::OutlierPolicy::Action::clip_to_fence ? "clip_to_fence"
                                                                               : "mark_missing"},
          {"fences", fences},
          {"fill", fill_},
          {"demographic_scaler", demographic_scaler_.to_json()},
          {"power_scaler", power_scaler_.to_json()},
          {"fitted_rows", fitted_rows_}};
}

FeatureTransform FeatureTransform::from_json(const nlohmann::json& j) {
  FeatureTransform t;
  t.schema_ = FeatureSchema::from_json(j.at("schema"));
  t.outlier_action_ = j.at("outlier_action").get<std::string>() == "mark_missing"
                          ? preprocess::OutlierPolicy::Action::mark_missing
                          : preprocess::OutlierPolicy::Action::clip_to_fence;
  for (const auto& f : j.at("fences")) {
    if (f.is_null()) {
      t.fences_.emplace_back(std::nullopt);
    } else {
      t.fences_.push_back(preprocess::OutlierFences{f.at(0).get<double>(), f.at(1).get<double>()});
    }
  }
  t.fill_ = j.at("fill").get<std::vector<double>>();
  t.demographic_scaler_ = preprocess::ScalerParams::from_json(j.at("demographic_scaler"));
  t.power_scaler_ = preprocess::ScalerParams::from_json(j.at("power_scaler"));
  t.fitted_rows_ = j.at("fitted_rows").get<std::size_t>();
  const std::size_t width = feature_row_width(t.schema_);
  if (t.fences_.size() != width || t.fill_.size() != width ||
      t.demographic_scaler_.width() != kDemographicCount ||
      t.power_scaler_.width() != t.schema_.psd_count()) {
    throw DataError("feature transform does not match its schema");
  }
  return t;
}

SubjectTensor tensor_from_row(std::span<const double> scaled_row, const FeatureSchema& schema,
                              bool include_coherence) {
  if (scaled_row.size() != feature_row_width(schema)) {
    throw ShapeError("scaled row width does not match schema");
  }
  if (include_coherence && schema.mode != FeatureMode::full) {
    throw InvalidArgument("coherence requested for a psd_only schema");
  }
  SubjectTensor t;
  t.n_bands = schema.bands.size();
  t.n_channels = schema.electrodes.size();
  const std::size_t n = t.n_channels;
  t.grid.assign(t.n_bands * n * n, 0.0);
  for (std::size_t d = 0; d < kDemographicCount; ++d) t.demographics[d] = scaled_row[d];
  const std::size_t pairs = spectral::CoherenceTensor::pair_count(n);
  const auto power = scaled_row.subspan(kDemographicCount, schema.psd_count());
  for (std::size_t b = 0; b < t.n_bands; ++b) {
    double* g = t.grid.data() + b * n * n;
    for (std::size_t i = 0; i < n; ++i) g[i * n + i] = power[b * n + i];
    if (!include_coherence) continue;
    const auto coh = scaled_row.subspan(kDemographicCount + schema.psd_count() + b * pairs, pairs);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = coh[spectral::CoherenceTensor::pair_index(i, j, n)];
        g[i * n + j] = v;
        g[j * n + i] = v;
      }
    }
  }
  return t;
}

SubjectTensor assemble_tensor(const SubjectRecord& record, bool include_coherence,
                              const FeatureTransform& transform) {
  if (include_coherence && !record.coherence) {
    throw InvalidArgument("record '" + record.id + "' lacks coherence but include_coherence is set");
  }
  const auto row = transform.apply(feature_row(record, transform.schema()));
  return tensor_from_row(row, transform.schema(), include_coherence);
}

void Histogram::add(std::optional<double> v) {
  if (!v || std::isnan(*v)) {
    ++missing;
    return;
  }
  std::size_t bin = 0;
  while (bin + 1 < counts.size() && *v >= edges[bin + 1]) ++bin;
  ++counts[bin];
}

std::vector<double> Histogram::fractions() const {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  std::vector<double> out(counts.size(), 0.0);
  if (total == 0) return out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out[i] = static_cast<double>(counts[i]) / static_cast<double>(total);
  }
  return out;
}

nlohmann::json Histogram::to_json() const {
  return {{"edges", edges}, {"counts", counts}, {"fractions", fractions()}, {"missing", missing}};
}

nlohmann::json DatasetSummary::to_json() const {
  return {{"n_records", n_records},
          {"class_counts", class_counts},
          {"age_hist", age_hist.to_json()},
          {"iq_hist", iq_hist.to_json()},
          {"education_hist", education_hist.to_json()},
          {"sex_by_class", sex_by_class},
          {"band_region_power", band_region_power},
          {"exemplars", exemplars}};
}

DatasetSummary summarize_dataset(const Dataset& data) {
  if (data.records.empty()) throw InvalidArgument("cannot summarize an empty dataset");
  DatasetSummary s;
  s.n_records = data.records.size();
  s.age_hist = make_hist(0.0, 120.0, 10.0);
  s.iq_hist = make_hist(40.0, 160.0, 10.0);
  s.education_hist = make_hist(0.0, 24.0, 2.0);

  const auto& schema = data.schema;
  const std::size_t n_ch = schema.electrodes.size();
  std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> power_acc;
  std::set<std::string> seen_class;

  for (const auto& r : data.records) {
    const std::string label(label_name(r.label));
    ++s.class_counts[label];
    s.age_hist.add(r.demographics.age);
    s.iq_hist.add(r.demographics.iq);
    s.education_hist.add(r.demographics.education);
    auto& sex = s.sex_by_class[label];
    sex.try_emplace("female", 0);
    sex.try_emplace("male", 0);
    sex.try_emplace("missing", 0);
    ++sex[r.demographics.sex ? std::string(sex_name(*r.demographics.sex)) : "missing"];

    for (std::size_t b = 0; b < schema.bands.size(); ++b) {
      for (std::size_t c = 0; c < n_ch; ++c) {
        const double p = r.psd.at(b, c);
        if (std::isnan(p)) continue;
        auto& acc = power_acc[schema.bands[b].name]
                             [std::string(region_name(electrode_region(schema.electrodes[c])))];
        acc.first += p;
        ++acc.second;
      }
    }

    if (seen_class.insert(label).second) {
      nlohmann::json features = nlohmann::json::object();
      const auto psd_names = schema.psd_names();
      for (std::size_t f = 0; f < psd_names.size(); ++f) {
        if (!std::isnan(r.psd.values[f])) features[psd_names[f]] = r.psd.values[f];
      }
      if (r.coherence) {
        const auto coh_names = schema.coh_names();
        for (std::size_t f = 0; f < coh_names.size() && f < r.coherence->values.size(); ++f) {
          if (!std::isnan(r.coherence->values[f])) features[coh_names[f]] = r.coherence->values[f];
        }
      }
      nlohmann::json demo = nlohmann::json::object();
      const auto& d = r.demographics;
      if (d.age) demo["age"] = *d.age;
      if (d.sex) demo["sex"] = sex_name(*d.sex);
      if (d.education) demo["education"] = *d.education;
      if (d.iq) demo["iq"] = *d.iq;
      s.exemplars.push_back(
          {{"id", r.id}, {"label", label}, {"demographics", demo}, {"features", features}});
    }
  }
  for (const auto& band : schema.bands) {
    for (Region region : kRegions) {
      const std::string rn(region_name(region));
      const auto& acc = power_acc[band.name][rn];
      s.band_region_power[band.name][rn] =
          acc.second ? acc.first / static_cast<double>(acc.second) : 0.0;
    }
  }
  return s;
}

}  // namespace neurospect::dataset
