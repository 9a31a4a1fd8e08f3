#include <gtest/gtest.h>

#include <fstream>

#include "../common/service_fixture.hpp"
#include "semret/http_api.hpp"

using namespace semret;
using namespace semret::service;
using nlohmann::json;

TEST(Http, LabelRoundTripReachesJudgmentsAndWeights) {
  fixture::ServiceFixture f;
  HttpServer server(f.api);
  const int port = server.start("127.0.0.1", 0);
  ASSERT_GT(port, 0);

  EXPECT_EQ(http_get("127.0.0.1", port, "/healthz").status, 200);
  const auto retrieved = http_post("127.0.0.1", port, "/v1/retrieve", R"({"query_text":"red lamp","k":5,"debug":true})");
  ASSERT_EQ(retrieved.status, 200);
  EXPECT_TRUE(json::parse(retrieved.body).contains("debug"));

  const auto before = json::parse(http_get("127.0.0.1", port, "/v1/hitl/weights").body);
  f.enqueue_all(1, 4);
  const auto listed = json::parse(http_get("127.0.0.1", port, "/v1/hitl/tasks?limit=10").body);
  ASSERT_EQ(listed["tasks"].size(), 4u);

  std::vector<std::string> expected;
  for (const auto& t : listed["tasks"]) {
    const bool ads = t["domain"] == "ads";
    std::vector<int> grades(t["items"].size(), ads ? 0 : 2);
    const auto reply = http_post("127.0.0.1", port, "/v1/hitl/labels",
                                 json{{"task_id", t["task_id"]}, {"grades", grades}, {"annotator_id", "qa"}}.dump());
    EXPECT_EQ(reply.status, 200) << reply.body;
    for (std::size_t i = 0; i < grades.size(); ++i)
      expected.push_back(json{{"query_id", t["query_id"]},
                              {"item_id", t["items"][i]["id"]},
                              {"grade", grades[i]},
                              {"source", "human"}}
                             .dump());
  }
  std::ifstream in(f.judgments);
  std::vector<std::string> stored;
  for (std::string l; std::getline(in, l);) stored.push_back(l);
  EXPECT_EQ(stored, expected);

  const auto rec = http_post("127.0.0.1", port, "/v1/hitl/recalibrate", "");
  ASSERT_EQ(rec.status, 200);
  const auto after = json::parse(http_get("127.0.0.1", port, "/v1/hitl/weights").body);
  EXPECT_NE(after, before);
  for (const auto& d : after["domains"])
    if (d["domain"] == "ads") EXPECT_GT(d["p"].get<double>(), 0.25);

  const auto bad = http_post("127.0.0.1", port, "/v1/hitl/labels", R"({"task_id":1,"grades":[7]})");
  EXPECT_EQ(bad.status, 400);
  EXPECT_EQ(json::parse(bad.body)["field"], "grades[0]");
  EXPECT_EQ(http_get("127.0.0.1", port, "/v1/nothing").status, 404);
  server.stop();
}
