#include <gtest/gtest.h>
#include <httplib.h>

#include <future>
#include <thread>

#include "neurospect/config.hpp"
#include "neurospect/errors.hpp"
#include "neurospect/pipeline.hpp"
#include "neurospect/service.hpp"
#include "neurospect/synthetic.hpp"
#include "support.hpp"

using namespace neurospect;
using namespace neurospect::service;
namespace nt = neurospect::testing;
using nlohmann::json;

namespace {

pipeline::TrainConfig tiny_config(std::size_t n_classes) {
  pipeline::TrainConfig c;
  c.epochs = 2;
  c.batch_size = 16;
  c.workers = 1;
  c.layers = {nn::Conv2D{2, 3, 3, 3, nn::Activation::relu}, nn::Flatten{}, nn::ConcatAux{4},
              nn::Dense{8, nn::Activation::relu}, nn::Dense{n_classes}, nn::Softmax{}};
  return c;
}

json request_for(const dataset::SubjectRecord& r, const dataset::FeatureSchema& schema, bool coherence) {
  json features = json::object();
  const auto psd = schema.psd_names();
  for (std::size_t i = 0; i < psd.size(); ++i) features[psd[i]] = r.psd.values[i];
  if (coherence) {
    const auto coh = schema.coh_names();
    for (std::size_t i = 0; i < coh.size(); ++i) features[coh[i]] = r.coherence->values[i];
  }
  json demo = {{"age", *r.demographics.age},
               {"sex", std::string(dataset::sex_name(*r.demographics.sex))},
               {"education", *r.demographics.education},
               {"iq", *r.demographics.iq}};
  return {{"demographics", demo}, {"features", features}};
}

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new dataset::Dataset(synthetic::synthesize_cohort(nt::small_cohort(10, 7, 8.0)));
    artifact_ = new pipeline::ModelArtifact(pipeline::train(*data_, tiny_config(7)).artifact);
  }
  static void TearDownTestSuite() {
    delete data_;
    delete artifact_;
  }
  void SetUp() override {
    ModelService::Options o;
    o.model_path = dir_ / "model.json";
    o.reports_dir = dir_.path();
    svc_ = std::make_unique<ModelService>(o);
  }

  json body_of(const HttpResponse& r) { return json::parse(r.body); }

  static dataset::Dataset* data_;
  static pipeline::ModelArtifact* artifact_;
  nt::TempDir dir_;
  std::unique_ptr<ModelService> svc_;
};
dataset::Dataset* ServiceTest::data_ = nullptr;
pipeline::ModelArtifact* ServiceTest::artifact_ = nullptr;

}  // namespace

TEST_F(ServiceTest, UnloadedServerAnswers503) {
  const auto r = svc_->predict(request_for(data_->records[0], data_->schema, true).dump());
  EXPECT_EQ(r.status, 503);
  EXPECT_EQ(body_of(r)["code"], "model_unavailable");
  EXPECT_EQ(svc_->model_info().status, 503);
  EXPECT_FALSE(svc_->reload());
  EXPECT_FALSE(svc_->last_error().empty());
  const auto h = body_of(svc_->health());
  EXPECT_EQ(h["model_loaded"], false);
}

TEST_F(ServiceTest, ValidRequestGivesSevenProbabilities) {
  svc_->set_model(*artifact_);
  const auto& rec = data_->records[3];
  const auto r = svc_->predict(request_for(rec, data_->schema, true).dump());
  ASSERT_EQ(r.status, 200) << r.body;
  const auto b = body_of(r);
  ASSERT_EQ(b["probabilities"].size(), 7u);
  double sum = 0, best = -1;
  std::string argmax;
  for (const auto& [label, p] : b["probabilities"].items()) {
    sum += p.get<double>();
    if (p.get<double>() > best) {
      best = p.get<double>();
      argmax = label;
    }
  }
  EXPECT_NEAR(sum, 1.0, 1e-6);
  EXPECT_EQ(b["label"], argmax);
  EXPECT_EQ(b["coherence_ablated"], false);
  EXPECT_EQ(b["schema_fingerprint"], artifact_->fingerprint());
  EXPECT_EQ(b["model_version"], artifact_->version_id());
  // Same answer as the library call.
  EXPECT_EQ(b["label"], artifact_->predict(rec).label);
}

TEST_F(ServiceTest, MissingFeatureNamed) {
  svc_->set_model(*artifact_);
  auto req = request_for(data_->records[0], data_->schema, false);
  req["features"].erase("psd.alpha.O2");
  const auto r = svc_->predict(req.dump());
  EXPECT_EQ(r.status, 400);
  const auto b = body_of(r);
  EXPECT_EQ(b["code"], "missing_features");
  EXPECT_NE(b["message"].get<std::string>().find("psd.alpha.O2"), std::string::npos);
  EXPECT_EQ(b["details"]["missing"], json::array({"psd.alpha.O2"}));
}

TEST_F(ServiceTest, WithoutCoherenceIsFlaggedAblated) {
  svc_->set_model(*artifact_);
  const auto r = svc_->predict(request_for(data_->records[0], data_->schema, false).dump());
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_EQ(body_of(r)["coherence_ablated"], true);
}

TEST_F(ServiceTest, MalformedAndInvalidRequests) {
  svc_->set_model(*artifact_);
  EXPECT_EQ(body_of(svc_->predict("{not json")).at("code"), "malformed_request");
  EXPECT_EQ(body_of(svc_->predict("[1,2]")).at("code"), "malformed_request");
  EXPECT_EQ(body_of(svc_->predict("{}")).at("code"), "malformed_request");

  auto req = request_for(data_->records[0], data_->schema, false);
  req["features"]["psd.delta.Fp1"] = "high";
  auto r = svc_->predict(req.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(body_of(r)["code"], "invalid_values");

  req = request_for(data_->records[0], data_->schema, false);
  req["features"]["psd.delta.Xx"] = 1.0;
  EXPECT_EQ(body_of(svc_->predict(req.dump()))["code"], "unknown_features");

  req = request_for(data_->records[0], data_->schema, false);
  req["demographics"]["age"] = 400;
  EXPECT_EQ(body_of(svc_->predict(req.dump()))["code"], "invalid_values");

  req = request_for(data_->records[0], data_->schema, true);
  req["features"].erase("coh.gamma.O1.O2");
  EXPECT_EQ(body_of(svc_->predict(req.dump()))["code"], "missing_features");
}

TEST_F(ServiceTest, VectorFormNeedsMatchingSchemaId) {
  svc_->set_model(*artifact_);
  const auto& rec = data_->records[2];
  json vec = json::array();
  for (double v : rec.psd.values) vec.push_back(v);
  for (double v : rec.coherence->values) vec.push_back(v);
  json req = {{"schema", artifact_->fingerprint()}, {"vector", vec},
              {"demographics", request_for(rec, data_->schema, false)["demographics"]}};
  const auto ok = svc_->predict(req.dump());
  ASSERT_EQ(ok.status, 200) << ok.body;
  EXPECT_EQ(body_of(ok)["probabilities"],
            body_of(svc_->predict(request_for(rec, data_->schema, true).dump()))["probabilities"]);
  req["schema"] = "deadbeef";
  EXPECT_EQ(body_of(svc_->predict(req.dump()))["code"], "schema_mismatch");
}

TEST_F(ServiceTest, ConcurrentRequestsMatchSerial) {
  svc_->set_model(*artifact_);
  std::vector<std::string> bodies, serial;
  for (std::size_t i = 0; i < 16; ++i) {
    bodies.push_back(request_for(data_->records[i], data_->schema, i % 2 == 0).dump());
    serial.push_back(svc_->predict(bodies.back()).body);
  }
  std::vector<std::future<std::string>> futs;
  for (const auto& b : bodies) {
    futs.push_back(std::async(std::launch::async, [&, b] { return svc_->predict(b).body; }));
  }
  for (std::size_t i = 0; i < futs.size(); ++i) EXPECT_EQ(futs[i].get(), serial[i]);
}

TEST_F(ServiceTest, ReloadSwapsAndKeepsOldOnFailure) {
  pipeline::save_artifact(*artifact_, dir_ / "model.json");
  ASSERT_TRUE(svc_->reload()) << svc_->last_error();
  const auto held = svc_->model();
  const auto v1 = held->version;

  auto other = *artifact_;
  other.model.params()[0].bias[0] += 0.5f;
  pipeline::save_artifact(other, dir_ / "model.json");
  ASSERT_TRUE(svc_->reload());
  EXPECT_NE(svc_->model()->version, v1);
  EXPECT_EQ(held->version, v1);  // in-flight holders keep the old model

  nt::write_file(dir_ / "model.json", "corrupt");
  const auto before = svc_->model()->version;
  EXPECT_FALSE(svc_->reload());
  EXPECT_EQ(svc_->model()->version, before);
}

TEST_F(ServiceTest, MetricsPassthroughAndNewestFile) {
  EXPECT_EQ(svc_->metrics_latest().status, 404);
  EXPECT_EQ(body_of(svc_->metrics_latest())["code"], "not_found");
  const std::string eval = "{\"accuracy\": 0.5, \"n\": 4}\n";
  nt::write_file(dir_ / "evaluation.json", eval);
  auto r = svc_->metrics_latest();
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body, eval);

  const std::string abl = "{\"arms\": {}, \"deltas\": {}}\n";
  nt::write_file(dir_ / "ablation.json", abl);
  std::filesystem::last_write_time(dir_ / "ablation.json",
                                   std::filesystem::last_write_time(dir_ / "evaluation.json") +
                                       std::chrono::seconds(5));
  EXPECT_EQ(svc_->metrics_latest().body, abl);
}

TEST_F(ServiceTest, SummaryPassthrough) {
  EXPECT_EQ(svc_->dataset_summary().status, 404);
  const auto text = dataset::summarize_dataset(*data_).to_json().dump(2);
  nt::write_file(dir_ / "summary.json", text);
  const auto r = svc_->dataset_summary();
  EXPECT_EQ(r.body, text);
  const auto j = json::parse(r.body);
  std::size_t total = 0;
  for (const auto& [_, n] : j["class_counts"].items()) total += n.get<std::size_t>();
  EXPECT_EQ(total, data_->records.size());
  EXPECT_EQ(j["age_hist"]["edges"].size(), j["age_hist"]["counts"].size() + 1);
}

TEST_F(ServiceTest, ModelInfoDescribesSchema) {
  svc_->set_model(*artifact_);
  const auto b = body_of(svc_->model_info());
  EXPECT_EQ(b["classes"].size(), 7u);
  EXPECT_EQ(b["n_features"]["psd"], 114);
  EXPECT_EQ(b["n_features"]["coh"], 1026);
  EXPECT_EQ(b["electrodes"].size(), 19u);
}

TEST_F(ServiceTest, LiveHttpEndpoints) {
  svc_->set_model(*artifact_);
  nt::write_file(dir_ / "evaluation.json", "{\"accuracy\": 1}");
  std::filesystem::create_directories(dir_ / "static");
  nt::write_file(dir_ / "static" / "index.html", "<html>dash</html>");
  HttpServer server(*svc_, (dir_ / "static").string());
  const int port = server.bind("127.0.0.1", 0);
  std::thread t([&] { server.listen(); });
  httplib::Client cli("127.0.0.1", port);
  for (int i = 0; i < 100 && !server.running(); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));

  auto h = cli.Get("/health");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(json::parse(h->body)["model_loaded"], true);

  auto p = cli.Post("/predict", request_for(data_->records[1], data_->schema, true).dump(), "application/json");
  ASSERT_TRUE(p);
  EXPECT_EQ(p->status, 200);
  EXPECT_EQ(json::parse(p->body)["probabilities"].size(), 7u);

  auto bad = cli.Post("/predict", "{}", "application/json");
  EXPECT_EQ(bad->status, 400);
  EXPECT_TRUE(json::parse(bad->body).contains("code"));

  EXPECT_EQ(cli.Get("/metrics/latest")->body, "{\"accuracy\": 1}");
  auto missing = cli.Get("/dataset/summary");
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(json::parse(missing->body)["code"], "not_found");

  auto nowhere = cli.Get("/no/such/route");
  EXPECT_EQ(nowhere->status, 404);
  EXPECT_EQ(json::parse(nowhere->body)["code"], "not_found");

  auto page = cli.Get("/index.html");
  ASSERT_TRUE(page);
  EXPECT_EQ(page->body, "<html>dash</html>");
  EXPECT_EQ(cli.Get("/model")->status, 200);

  server.stop();
  t.join();
}

TEST(Config, PrecedenceCliEnvFileDefaults) {
  nt::TempDir dir;
  nt::write_file(dir / "serve.json",
                 R"({"port": 9000, "model": "/file/model.json", "static_dir": "/file/static", "host": "0.0.0.0"})");
  std::map<std::string, std::string> env = {{"NEUROSPECT_PORT", "9100"}, {"NEUROSPECT_MODEL", "/env/m.json"}};
  const config::EnvLookup lookup = [&](const std::string& k) -> std::optional<std::string> {
    auto it = env.find(k);
    if (it == env.end()) return std::nullopt;
    return it->second;
  };
  config::ServeOverrides cli;
  cli.model = "/cli/m.json";
  const auto s = config::resolve_serve_settings(dir / "serve.json", lookup, cli);
  EXPECT_EQ(s.model, "/cli/m.json");       // CLI beats env
  EXPECT_EQ(s.port, 9100);                 // env beats file
  EXPECT_EQ(s.static_dir, "/file/static"); // file beats default
  EXPECT_EQ(s.host, "0.0.0.0");
  EXPECT_EQ(s.reports_dir, "/cli");        // defaults to the model's directory

  const auto d = config::resolve_serve_settings(std::nullopt, [](const std::string&) { return std::nullopt; }, {});
  EXPECT_EQ(d.port, 8080);
  EXPECT_EQ(d.host, "127.0.0.1");

  env["NEUROSPECT_PORT"] = "eighty";
  EXPECT_THROW(config::resolve_serve_settings(std::nullopt, lookup, {}), InvalidArgument);
  nt::write_file(dir / "bad.json", "{port: }");
  try {
    config::resolve_serve_settings(dir / "bad.json", lookup, cli);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("config parse error"), std::string::npos);
  }
}

TEST(ErrorResponse, StructuredBody) {
  const auto r = error_response(418, "teapot", "short and stout", {{"x", 1}});
  EXPECT_EQ(r.status, 418);
  const auto j = json::parse(r.body);
  EXPECT_EQ(j["code"], "teapot");
  EXPECT_EQ(j["message"], "short and stout");
  EXPECT_EQ(j["details"]["x"], 1);
}
