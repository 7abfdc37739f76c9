#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "spoofprint/report.hpp"
#include "test_util.hpp"

using namespace spoofprint;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

IdResult sixteen_attack_table() {
  IdResult id;
  for (int a = 1; a <= 16; ++a)
    for (std::size_t f : {85u, 86u}) id.rows.push_back({AttackId::from_number(a), f, a * 1.234, a * 2.345 + f / 100.0});
  return id;
}

OodMatrix sample_matrix() {
  OodMatrix m;
  for (int a : {1, 8, 9, 10}) m.cols.push_back(AttackId::from_number(a));
  for (int a : {1, 8, 9, 10}) {
    m.rows.push_back({AttackId::from_number(a), 85});
    std::vector<double> row;
    for (int c : {1, 8, 9, 10}) row.push_back(c == a ? 0.8 : 10.0 * (a + c) / 3.0);
    m.cells.push_back(row);
  }
  return m;
}

}  // namespace

TEST(Colors, Anchors) {
  EXPECT_EQ(eer_color(0.8), eer_color(10.0));
  EXPECT_EQ(eer_color(0.8), (Rgb{99, 210, 120}));
  EXPECT_EQ(eer_color(35.0), (Rgb{250, 210, 90}));
  EXPECT_EQ(eer_color(50.0), (Rgb{230, 80, 70}));
  EXPECT_EQ(eer_color(97.0), eer_color(50.0));
}

TEST(Colors, GreenChannelMonotone) {
  for (double a = 0.0; a < 100.0; a += 0.25) EXPECT_GE(eer_color(a).g, eer_color(a + 0.25).g) << a;
}

TEST(Histogram, Bins) {
  const auto h = compute_histogram({0.0, 0.1, 0.6, 1.0, 5.0}, 2, 0.0, 1.0);
  EXPECT_DOUBLE_EQ(h.density[0], 0.4);
  EXPECT_DOUBLE_EQ(h.density[1], 0.6);
  EXPECT_THROW(compute_histogram({1.0}, 1, 0, 1), DataError);
  EXPECT_THROW(compute_histogram({}, 4, 0, 1), DataError);
}

TEST(DistributionSvg, TwoClassesWithThreshold) {
  Xorshift64Star rng(1);
  Series a{"bona fide", {}}, b{"A10", {}};
  for (int i = 0; i < 300; ++i) {
    a.values.push_back(rng.normal(0.18, 0.07));
    b.values.push_back(rng.normal(0.09, 0.02));
  }
  DistributionPlot plot;
  plot.title = "F85 <test>";
  plot.threshold = 0.12;
  const auto svg = render_distribution_svg({a, b}, plot);
  EXPECT_EQ(count(svg, "<polyline"), 2u);
  EXPECT_EQ(count(svg, "class=\"threshold\""), 1u);
  EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
  EXPECT_NE(svg.find("F85 &lt;test&gt;"), std::string::npos);
  EXPECT_NE(svg.find("relative frequency"), std::string::npos);
  EXPECT_EQ(svg.find("href"), std::string::npos);
  EXPECT_EQ(svg.rfind("</svg>\n"), svg.size() - 7);
}

TEST(DistributionSvg, TwoBinsAndOneCurvePerAttack) {
  DistributionPlot plot;
  plot.bins = 2;
  plot.x_min = 0;
  plot.x_max = 100;
  const auto svg = render_distribution_svg({{"A01", {0, 45, 48}}, {"A02", {50}}, {"A03", {99}}}, plot);
  EXPECT_EQ(count(svg, "<polyline"), 3u);
  EXPECT_NE(svg.find("data-series=\"A01\" data-density=\"1,0\""), std::string::npos);
  EXPECT_NE(svg.find("data-series=\"A02\" data-density=\"0,1\""), std::string::npos);
  EXPECT_THROW(render_distribution_svg({{"empty", {}}}, plot), DataError);
}

TEST(Heatmap, StructureAndColors) {
  const auto html = render_heatmap_html(sample_matrix());
  EXPECT_EQ(count(html, "<td class=\"id"), 4u);
  EXPECT_NE(html.find("GlowTTS"), std::string::npos);
  EXPECT_NE(html.find("A09+HifiGANv2"), std::string::npos);
  EXPECT_NE(html.find("rgb(99,210,120)\">0.8<"), std::string::npos);
  EXPECT_NE(html.find("qsep-left"), std::string::npos);
  EXPECT_NE(html.find("<tr class=\"qsep-top\">"), std::string::npos);
  EXPECT_NE(html.find("<!DOCTYPE html>"), std::string::npos);
}

TEST(Tables, SixteenAttacksGiveThirtyTwoRows) {
  const auto csv = id_table_csv(sixteen_attack_table());
  EXPECT_EQ(count(csv, "\n"), 33u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "attack,system,feature,feature_name,train_eer,test_eer");
  EXPECT_NE(csv.find("A01,GlowTTS,F85,MeanUnvoicedSegmentLength,1.2,3.2\n"), std::string::npos);
}

TEST(Tables, JsonRoundTrips) {
  const auto id = sixteen_attack_table();
  const auto back = id_rows_from_json(nlohmann::json::parse(id_table_json(id).dump()));
  ASSERT_EQ(back.size(), id.rows.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].attack, id.rows[i].attack);
    EXPECT_EQ(back[i].feature_index, id.rows[i].feature_index);
    EXPECT_EQ(back[i].train_eer, id.rows[i].train_eer);
    EXPECT_EQ(back[i].test_eer, id.rows[i].test_eer);
  }

  const auto m = sample_matrix();
  const auto m2 = ood_matrix_from_json(nlohmann::json::parse(ood_matrix_json(m).dump()));
  EXPECT_EQ(m2.cells, m.cells);
  EXPECT_EQ(m2.cols, m.cols);
  EXPECT_EQ(ood_matrix_csv(m2), ood_matrix_csv(m));

  const std::vector<FrontEndAggregates> ag = {{"single-feature", aggregate_id_ood(m)}};
  const auto ag2 = aggregates_from_json(nlohmann::json::parse(aggregates_json(ag).dump()));
  EXPECT_EQ(aggregates_json(ag2).dump(), aggregates_json(ag).dump());
}

TEST(Tables, AggregateColumns) {
  const std::vector<FrontEndAggregates> ag = {{"single-feature", aggregate_id_ood(sample_matrix())},
                                              {"all-feature", aggregate_id_ood(sample_matrix())}};
  const auto csv = aggregates_csv(ag);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "attack,front_end,id_eer,ood_eer");
  EXPECT_EQ(count(csv, "\n"), 9u);
  EXPECT_NE(csv.find("A01,single-feature,0.8,"), std::string::npos);
}

TEST(Tables, EmitIsByteDeterministic) {
  const auto id = sixteen_attack_table();
  const std::vector<FrontEndAggregates> ag = {{"single-feature", aggregate_id_ood(sample_matrix())}};
  const auto d1 = spoofprint::testing::scratch_dir("tables1"), d2 = spoofprint::testing::scratch_dir("tables2");
  emit_tables(id, ag, d1);
  emit_tables(id, ag, d2);
  emit_heatmap_html(sample_matrix(), d1 / "h.html");
  emit_heatmap_html(sample_matrix(), d2 / "h.html");
  emit_distribution_svg({{"x", {1, 2, 3}}}, {}, d1 / "d.svg");
  emit_distribution_svg({{"x", {1, 2, 3}}}, {}, d2 / "d.svg");
  for (const char* f : {"id_table.csv", "id_table.json", "aggregates.csv", "aggregates.json", "h.html", "d.svg"}) {
    const auto a = slurp(d1 / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(d2 / f)) << f;
  }
}

TEST(Format, OneDecimal) {
  EXPECT_EQ(format_eer(7.25), "7.2");
  EXPECT_EQ(format_eer(10.3), "10.3");
  EXPECT_EQ(format_eer(0.0), "0.0");
  EXPECT_EQ(detail::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(detail::csv_field("q\"x"), "\"q\"\"x\"");
}
