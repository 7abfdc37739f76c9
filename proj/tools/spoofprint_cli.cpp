// Command-line front end for the spoofprint pipeline.
//
// Exit codes: 0 success, 1 usage, 2 data/validation, 3 I/O. Failures print one
// JSON object on stderr: {"error": "<kind>", "code": N, "message": "..."}.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spoofprint/spoofprint.hpp"

namespace fs = std::filesystem;
using namespace spoofprint;

namespace {

struct Config {
  ExtractConfig extract;
  TrainConfig train;
};

Config load_config(const std::string& path) {
  Config cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.contains("extract")) {
      const auto& e = j.at("extract");
      auto& x = cfg.extract;
      x.hop_s = e.value("hop_s", x.hop_s);
      x.spectral_frame_s = e.value("spectral_frame_s", x.spectral_frame_s);
      x.f0_frame_s = e.value("f0_frame_s", x.f0_frame_s);
      x.sma_window = e.value("sma_window", x.sma_window);
      x.loudness.n_bands = e.value("mel_bands", x.loudness.n_bands);
      x.voicing.min_f0_hz = e.value("min_f0_hz", x.voicing.min_f0_hz);
      x.voicing.max_f0_hz = e.value("max_f0_hz", x.voicing.max_f0_hz);
      x.voicing.nac_threshold = e.value("nac_threshold", x.voicing.nac_threshold);
      x.voicing.rms_floor = e.value("rms_floor", x.voicing.rms_floor);
      x.voicing.rms_relative = e.value("rms_relative", x.voicing.rms_relative);
      x.voicing.median_width = e.value("median_width", x.voicing.median_width);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      cfg.train.lr = t.value("lr", cfg.train.lr);
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
      cfg.train.l2 = t.value("l2", cfg.train.l2);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config: " + std::string(e.what()));
  }
  if (cfg.extract.f0_frame_s < cfg.extract.hop_s || cfg.extract.spectral_frame_s < cfg.extract.hop_s)
    throw DataError("config: frame lengths must be at least the hop");
  if (!(cfg.train.lr > 0.0) || cfg.train.l2 < 0.0) throw DataError("config: invalid trainer hyperparameters");
  return cfg;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

fs::path sibling(const fs::path& p, const std::string& suffix_ext) {
  return p.parent_path() / (p.stem().string() + suffix_ext);
}

int fail(const char* kind, int code, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["code"] = code;
  j["message"] = message;
  std::cerr << j.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpretable scalar-feature anti-spoofing toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON overrides for frame sizes, voicing thresholds and trainer");

  std::string manifest, out, features_path, pools_path, attack, html, embeddings, ids_path, svg, spec_path,
      tables_dir, pool_name = "train";
  double ratio = 0.8;
  std::uint64_t seed = 0;
  std::size_t jobs = 1, top = 2, index = 85, bins = 30;
  std::optional<double> threshold;
  bool all_features = false;

  auto* pools_cmd = app.add_subcommand("pools", "Split a manifest into train/eval pools");
  pools_cmd->add_option("--manifest", manifest)->required();
  pools_cmd->add_option("--ratio", ratio)->check(CLI::Range(0.0, 1.0));
  pools_cmd->add_option("--seed", seed);
  pools_cmd->add_option("--out", out)->required();

  auto* extract_cmd = app.add_subcommand("extract", "Extract scalar features for every manifest entry");
  extract_cmd->add_option("--manifest", manifest)->required();
  extract_cmd->add_option("--out", out)->required();
  extract_cmd->add_option("--jobs", jobs)->check(CLI::PositiveNumber);

  auto* rank_cmd = app.add_subcommand("rank", "Rank features by single-feature training-pool EER");
  rank_cmd->add_option("--features", features_path)->required();
  rank_cmd->add_option("--pools", pools_path)->required();
  rank_cmd->add_option("--attack", attack)->required();
  rank_cmd->add_option("--top", top)->check(CLI::PositiveNumber);
  rank_cmd->add_option("--out", out)->required();

  auto* id_cmd = app.add_subcommand("eval-id", "In-domain evaluation of the top features per attack");
  id_cmd->add_option("--features", features_path)->required();
  id_cmd->add_option("--pools", pools_path)->required();
  id_cmd->add_option("--top", top)->check(CLI::PositiveNumber);
  id_cmd->add_option("--out", out, "CSV table; a .json twin is written alongside")->required();

  auto* ood_cmd = app.add_subcommand("eval-ood", "Out-of-domain matrix of the in-domain models");
  ood_cmd->add_option("--features", features_path)->required();
  ood_cmd->add_option("--pools", pools_path)->required();
  ood_cmd->add_option("--top", top)->check(CLI::PositiveNumber);
  ood_cmd->add_option("--out", out, "CSV matrix; a .json twin with aggregates is written alongside")->required();
  ood_cmd->add_option("--html", html, "colour-coded heatmap");
  ood_cmd->add_flag("--all-features", all_features, "also run the all-feature logistic regression matrix");
  ood_cmd->add_option("--tables-dir", tables_dir, "write id_table and aggregates CSV/JSON here");

  auto* embed_cmd = app.add_subcommand("embed-eer", "Per-column EER of external embeddings");
  embed_cmd->add_option("--embeddings", embeddings, "JSON lines, or headerless CSV with a .ids sidecar")->required();
  embed_cmd->add_option("--ids", ids_path, "utt_id sidecar for CSV input (default: <embeddings>.ids)");
  embed_cmd->add_option("--manifest", manifest)->required();
  embed_cmd->add_option("--pools", pools_path)->required();
  embed_cmd->add_option("--pool", pool_name)->check(CLI::IsMember({"train", "eval"}));
  embed_cmd->add_option("--bins", bins)->check(CLI::Range(2, 1000));
  embed_cmd->add_option("--out", out)->required();
  embed_cmd->add_option("--svg", svg);

  auto* train_cmd = app.add_subcommand("train-all", "Logistic regression on all implemented features");
  train_cmd->add_option("--features", features_path)->required();
  train_cmd->add_option("--pools", pools_path)->required();
  train_cmd->add_option("--attack", attack)->required();
  train_cmd->add_option("--out", out)->required();

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic labelled corpus");
  synth_cmd->add_option("--spec", spec_path)->required();
  synth_cmd->add_option("--out", out)->required();

  auto* plot_cmd = app.add_subcommand("plot-dist", "Distribution plot of one feature for bona fide vs an attack");
  plot_cmd->add_option("--features", features_path)->required();
  plot_cmd->add_option("--index", index)->check(CLI::Range(std::size_t{0}, kFeatureCount - 1));
  plot_cmd->add_option("--attack", attack)->required();
  plot_cmd->add_option("--bins", bins)->check(CLI::Range(2, 1000));
  plot_cmd->add_option("--threshold", threshold);
  plot_cmd->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fail("usage", 1, e.what());
  }

  try {
    const Config cfg = load_config(config_path);

    if (*pools_cmd) {
      const auto ds = parse_manifest(fs::path(manifest));
      write_file(out, split_pools(ds, ratio, seed).to_json().dump(2) + "\n");
    } else if (*extract_cmd) {
      const auto ds = parse_manifest(fs::path(manifest));
      const auto table = extract_dataset(ds, jobs, cfg.extract, [](std::size_t done, std::size_t total) {
        if (done % 50 == 0 || done == total) std::fprintf(stderr, "extracted %zu/%zu\n", done, total);
      });
      if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
      write_features_jsonl(fs::path(out), table);
    } else if (*rank_cmd) {
      const auto table = read_features_jsonl(fs::path(features_path));
      const auto pools = PoolAssignment::from_json(read_json(pools_path));
      const auto a = AttackId::parse(attack);
      nlohmann::ordered_json j;
      j["attack"] = a.str();
      auto rows = nlohmann::ordered_json::array();
      for (const auto& rf : rank_features(table, pools, a, top)) {
        nlohmann::ordered_json r;
        r["feature"] = rf.index;
        r["name"] = default_registry()[rf.index].name;
        r["train_eer"] = rf.train_eer;
        rows.push_back(std::move(r));
        std::printf("F%zu\t%s\t%s\n", rf.index, default_registry()[rf.index].name.c_str(),
                    format_eer(rf.train_eer).c_str());
      }
      j["ranking"] = std::move(rows);
      write_file(out, j.dump(2) + "\n");
    } else if (*id_cmd) {
      const auto table = read_features_jsonl(fs::path(features_path));
      const auto pools = PoolAssignment::from_json(read_json(pools_path));
      const auto id = run_id_protocol(table, pools, attacks_in(table), top, cfg.train);
      write_file(out, id_table_csv(id));
      write_file(sibling(out, ".json"), id_table_json(id).dump(2) + "\n");
    } else if (*ood_cmd) {
      const auto table = read_features_jsonl(fs::path(features_path));
      const auto pools = PoolAssignment::from_json(read_json(pools_path));
      const auto attacks = attacks_in(table);
      const auto id = run_id_protocol(table, pools, attacks, top, cfg.train);
      const auto matrix = run_ood_protocol(table, pools, id, attacks);
      std::vector<FrontEndAggregates> aggregates{{"single-feature", aggregate_id_ood(matrix)}};
      nlohmann::ordered_json j;
      j["single_feature"] = ood_matrix_json(matrix);
      if (all_features) {
        std::vector<std::string> warnings;
        const auto full = run_all_feature_protocol(table, pools, attacks, cfg.train, default_registry(), &warnings);
        for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
        aggregates.push_back({"all-feature", aggregate_id_ood(full)});
        j["all_feature"] = ood_matrix_json(full);
        write_file(sibling(out, "_all.csv"), ood_matrix_csv(full));
      }
      j["aggregates"] = aggregates_json(aggregates);
      write_file(out, ood_matrix_csv(matrix));
      write_file(sibling(out, ".json"), j.dump(2) + "\n");
      if (!html.empty()) emit_heatmap_html(matrix, html);
      if (!tables_dir.empty()) emit_tables(id, aggregates, tables_dir);
    } else if (*embed_cmd) {
      const auto ds = parse_manifest(fs::path(manifest));
      const auto pools = PoolAssignment::from_json(read_json(pools_path));
      const auto e = read_embeddings(embeddings, ids_path.empty() ? std::nullopt
                                                                  : std::optional<fs::path>(ids_path));
      const Pool pool = pool_name == "eval" ? Pool::eval_pool : Pool::train_pool;
      nlohmann::ordered_json j;
      j["pool"] = pool_name;
      j["dim"] = e.dim();
      nlohmann::ordered_json per_attack;
      std::vector<Series> series;
      for (AttackId a : ds.attacks()) {
        auto eers = score_embedding_columns(e, ds, pools, a, pool);
        per_attack[a.str()] = eers;
        series.push_back({a.str(), std::move(eers)});
      }
      j["eer"] = std::move(per_attack);
      write_file(out, j.dump(2) + "\n");
      if (!svg.empty()) {
        DistributionPlot plot;
        plot.title = "Single-column EER distribution";
        plot.x_label = "EER (%)";
        plot.bins = bins;
        plot.x_min = 0.0;
        plot.x_max = 100.0;
        emit_distribution_svg(series, plot, svg);
      }
    } else if (*train_cmd) {
      const auto table = read_features_jsonl(fs::path(features_path));
      const auto pools = PoolAssignment::from_json(read_json(pools_path));
      const auto a = AttackId::parse(attack);
      std::vector<std::string> warnings;
      const auto slots = default_registry().implemented();
      const auto model = train_on_attack(table, pools, a, slots, cfg.train, &warnings);
      for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      write_file(out, to_json(model).dump(2) + "\n");
      std::printf("%s\teval EER %s\n", a.str().c_str(), format_eer(evaluate_model(model, table, pools, a)).c_str());
    } else if (*synth_cmd) {
      const auto path = gen_corpus(synth_corpus_from_json(read_json(spec_path)), out);
      std::printf("%s\n", path.string().c_str());
    } else if (*plot_cmd) {
      const auto table = read_features_jsonl(fs::path(features_path));
      const auto a = AttackId::parse(attack);
      if (!default_registry()[index].implemented)
        throw DataError("feature slot " + std::to_string(index) + " is not implemented");
      Series bona{"bona fide", {}}, spoof{a.str(), {}};
      for (const auto& [id, fv] : table) {
        if (!fv.label || !fv.values[index]) continue;
        if (*fv.label == Label::bonafide) bona.values.push_back(*fv.values[index]);
        else if (fv.attack == a) spoof.values.push_back(*fv.values[index]);
      }
      if (spoof.values.empty()) throw DataError("attack " + a.str() + " absent from features file");
      if (bona.values.empty()) throw DataError("no bona fide rows in features file");
      DistributionPlot plot;
      plot.title = "F" + std::to_string(index) + " " + default_registry()[index].name;
      plot.x_label = default_registry()[index].name;
      plot.bins = bins;
      plot.threshold = threshold ? threshold
                                 : std::optional<double>(compute_eer(ScoreSet(bona.values, spoof.values),
                                                                     Polarity::best_of_both)
                                                             .threshold);
      emit_distribution_svg({bona, spoof}, plot, out);
    }
  } catch (const DataError& e) {
    return fail("data", 2, e.what());
  } catch (const IoError& e) {
    return fail("io", 3, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail("io", 3, e.what());
  } catch (const std::exception& e) {
    return fail("data", 2, e.what());
  }
  return 0;
}
