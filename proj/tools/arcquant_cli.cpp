// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0
//
// arcquant: calibration, quantization, layer simulation and bound checks.
//
// Exit status: 0 on success with no violations, 1 when a check reports
// violations, 2 on usage or I/O errors.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "arcquant/analysis.hpp"
#include "arcquant/arc_pipeline.hpp"
#include "arcquant/baselines.hpp"
#include "arcquant/calibration.hpp"
#include "arcquant/format.hpp"
#include "arcquant/refgemm.hpp"
#include "arcquant/synthetic.hpp"
#include "arcquant/tensorio.hpp"
#include "arcquant/verify.hpp"

namespace {

using arcquant::Index;
using nlohmann::json;

enum class Emit { Text, Json, Csv };

struct RunConfig {
  std::string format = "nvfp4";
  std::string profile;
  std::uint64_t seed = 0;
  double alpha = 0.5;
  std::optional<Index> s_override;
  std::string out;
  Emit emit = Emit::Text;
};

json format_json(const arcquant::FormatSpec& spec) {
  return json{{"name", spec.name},
              {"element", arcquant::traits(spec.element).name},
              {"block_size", spec.block_size},
              {"scale", std::string(arcquant::to_string(spec.scale))},
              {"tensor_scale", spec.tensor_scale}};
}

std::string format_text(const arcquant::FormatSpec& spec) {
  std::ostringstream os;
  os << spec.name << " (" << arcquant::traits(spec.element).name << ", g=" << spec.block_size << ", scale "
     << arcquant::to_string(spec.scale) << (spec.tensor_scale ? ", FP32 tensor scale" : "") << ")";
  return os.str();
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

// Flattens one level of a JSON object into "key" / "key.sub" columns.
void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten(*it, key, out);
    } else if (it->is_string()) {
      out.emplace_back(key, it->get<std::string>());
    } else if (it->is_number_float()) {
      out.emplace_back(key, fmt(it->get<double>()));
    } else {
      out.emplace_back(key, it->dump());
    }
  }
}

// Prints `rows` as CSV; the header is the union of keys in first-seen order.
void print_csv(const json& rows) {
  std::vector<std::vector<std::pair<std::string, std::string>>> table;
  std::vector<std::string> header;
  for (const auto& row : rows) {
    table.emplace_back();
    flatten(row, "", table.back());
    for (const auto& cell : table.back())
      if (std::find(header.begin(), header.end(), cell.first) == header.end()) header.push_back(cell.first);
  }
  for (std::size_t i = 0; i < header.size(); ++i) std::cout << (i ? "," : "") << header[i];
  std::cout << "\n";
  for (const auto& cells : table) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) std::cout << ",";
      for (const auto& [k, v] : cells)
        if (k == header[i]) std::cout << v;
    }
    std::cout << "\n";
  }
}

void print_text(const json& rows) {
  for (const auto& row : rows) {
    std::vector<std::pair<std::string, std::string>> cells;
    flatten(row, "", cells);
    for (const auto& [k, v] : cells) std::cout << "  " << k << " = " << v << "\n";
    std::cout << "\n";
  }
}

// Every report carries the seed and format it was produced with.
void emit_report(const RunConfig& cfg, const std::string& command, const arcquant::FormatSpec* spec, json rows,
                 json extra = json::object()) {
  json doc{{"command", command}, {"seed", cfg.seed}};
  if (spec) doc["format"] = format_json(*spec);
  for (auto it = extra.begin(); it != extra.end(); ++it) doc[it.key()] = *it;
  doc["rows"] = rows;

  switch (cfg.emit) {
    case Emit::Json:
      std::cout << doc.dump(2) << "\n";
      break;
    case Emit::Csv:
      std::cout << "# command=" << command << " seed=" << cfg.seed;
      if (spec) std::cout << " format=" << spec->name;
      for (auto it = extra.begin(); it != extra.end(); ++it)
        std::cout << " " << it.key() << "=" << (it->is_number_float() ? fmt(it->get<double>()) : it->dump());
      std::cout << "\n";
      print_csv(rows);
      break;
    case Emit::Text:
      std::cout << command << ": seed " << cfg.seed;
      if (spec) std::cout << ", format " << format_text(*spec);
      std::cout << "\n";
      for (auto it = extra.begin(); it != extra.end(); ++it)
        std::cout << it.key() << ": " << (it->is_number_float() ? fmt(it->get<double>()) : it->dump()) << "\n";
      std::cout << "\n";
      print_text(rows);
      break;
  }
}

arcquant::CalibrationProfile load_or_build_profile(const RunConfig& cfg, const Eigen::MatrixXd& x) {
  arcquant::CalibrationProfile profile;
  if (!cfg.profile.empty()) {
    profile = arcquant::load_profile(cfg.profile);
  } else {
    const std::vector<Eigen::MatrixXd> batches{x};
    profile = arcquant::build_profile(batches, "input");
  }
  if (cfg.s_override) profile = arcquant::with_outlier_count(profile, *cfg.s_override);
  return profile;
}

int cmd_formats(const RunConfig& cfg) {
  json rows = json::array();
  for (const auto& r : arcquant::format_table()) {
    rows.push_back(json{{"format", r.format},
                        {"element_bits", r.element_bits},
                        {"element_type", r.element_type},
                        {"bias", r.bias},
                        {"max_normal", r.max_normal},
                        {"block_size", r.block_size},
                        {"scale_type", r.scale_type},
                        {"scale_bits", r.scale_bits},
                        {"tensor_scale", r.tensor_scale}});
  }
  if (cfg.emit == Emit::Text) {
    std::cout << "formats: seed " << cfg.seed << "\n";
    std::cout << std::left << std::setw(8) << "format" << std::setw(6) << "bits" << std::setw(12) << "element"
              << std::setw(6) << "bias" << std::setw(10) << "max" << std::setw(6) << "g" << std::setw(7) << "scale"
              << std::setw(12) << "scale_bits" << "tensor" << "\n";
    for (const auto& r : rows) {
      std::cout << std::left << std::setw(8) << r["format"].get<std::string>() << std::setw(6)
                << r["element_bits"].get<int>() << std::setw(12) << r["element_type"].get<std::string>()
                << std::setw(6) << r["bias"].get<int>() << std::setw(10)
                << ("±" + fmt(r["max_normal"].get<double>())) << std::setw(6) << r["block_size"].get<Index>()
                << std::setw(7) << r["scale_type"].get<std::string>() << std::setw(12) << r["scale_bits"].get<int>()
                << r["tensor_scale"].get<std::string>() << "\n";
    }
    return 0;
  }
  emit_report(cfg, "formats", nullptr, rows);
  return 0;
}

int cmd_gen(const RunConfig& cfg, Index k, Index n, Index outliers, double scale) {
  if (cfg.out.empty()) throw std::invalid_argument("gen: --out is required");
  const Eigen::MatrixXd x = arcquant::gen_synthetic(k, n, outliers, scale, cfg.seed);
  arcquant::write_tensor(cfg.out, x);
  json channels = json::array();
  for (Index c : arcquant::synthetic_outlier_channels(k, outliers, cfg.seed)) channels.push_back(c);
  emit_report(cfg, "gen", nullptr,
              json::array({json{{"path", cfg.out}, {"rows", n}, {"cols", k}, {"outlier_scale", scale},
                                {"outlier_channels", channels.dump()}}}));
  return 0;
}

int cmd_calibrate(const RunConfig& cfg, const std::vector<std::string>& inputs, const std::string& layer) {
  if (cfg.out.empty()) throw std::invalid_argument("calibrate: --out is required");
  std::vector<Eigen::MatrixXd> batches;
  for (const auto& path : inputs) batches.push_back(arcquant::read_tensor(path));
  arcquant::CalibrationProfile profile = arcquant::build_profile(batches, layer);
  if (cfg.s_override) profile = arcquant::with_outlier_count(profile, *cfg.s_override);
  arcquant::save_profile(cfg.out, profile);
  emit_report(cfg, "calibrate", nullptr,
              json::array({json{{"layer", profile.layer},
                                {"k_in", profile.k_in()},
                                {"m", profile.m},
                                {"tau", profile.tau},
                                {"s_raw", profile.s_raw},
                                {"s", profile.s},
                                {"path", cfg.out}}}));
  return 0;
}

int cmd_quantize(const RunConfig& cfg, const std::string& input, bool weight) {
  const arcquant::FormatSpec spec = arcquant::format_by_name(cfg.format);
  const Eigen::MatrixXd x = arcquant::read_tensor(input);
  const bool augmented = !cfg.profile.empty() || cfg.s_override.has_value();

  arcquant::QuantizedTensor q;
  arcquant::ErrorReport report;
  if (augmented) {
    const arcquant::CalibrationProfile profile = load_or_build_profile(cfg, x);
    if (weight) {
      q = arcquant::quantize_weight_arc(x, profile, spec).tensor;
      const Eigen::MatrixXd wr = arcquant::apply_reorder(x, profile);
      const arcquant::QuantizedTensor primary = q.layout.outlier_cols > 0 ? arcquant::primary_part(q) : q;
      report = arcquant::empirical_report(wr, arcquant::dequantize(primary).leftCols(x.cols()),
                                          arcquant::check_single_stage(wr, primary));
    } else {
      const arcquant::AugmentedActivations act = arcquant::quantize_activation_arc(x, profile, spec);
      q = act.tensor;
      const arcquant::QuantizedTensor primary = act.outliers > 0 ? arcquant::primary_part(q) : q;
      Eigen::MatrixXd x_hat = arcquant::dequantize_padded(primary).leftCols(act.k_in);
      arcquant::BoundCheck check = arcquant::check_single_stage(act.prepared, primary);
      if (act.outliers > 0) {
        const arcquant::QuantizedTensor residual = arcquant::residual_part(q);
        const Index region = std::min(act.outliers, act.k_in);
        x_hat.leftCols(region) += arcquant::dequantize_padded(residual).leftCols(region);
        const arcquant::BoundCheck dual = arcquant::check_dual_stage(act.prepared, primary, residual, act.outliers);
        check.checked += dual.checked;
        check.violations += dual.violations;
      }
      report = arcquant::empirical_report(act.prepared, x_hat, check);
    }
  } else {
    q = arcquant::quantize_tensor(x, spec);
    report = arcquant::empirical_report(x, arcquant::dequantize(q), arcquant::check_single_stage(x, q));
  }
  if (!cfg.out.empty()) arcquant::write_quantized(cfg.out, q);

  json row = arcquant::to_json(report);
  row["input"] = input;
  row["augmented_cols"] = q.layout.outlier_cols;
  emit_report(cfg, "quantize", &spec, json::array({row}));
  return report.violations == 0 ? 0 : 1;
}

struct LayerInputs {
  Eigen::MatrixXd x;
  Eigen::MatrixXd w;
};

LayerInputs read_layer(const std::string& act, const std::string& wt) {
  LayerInputs in{arcquant::read_tensor(act), arcquant::read_tensor(wt)};
  if (in.x.cols() != in.w.cols())
    throw std::invalid_argument("activation and weight disagree on K_in (" + std::to_string(in.x.cols()) + " vs " +
                                std::to_string(in.w.cols()) + ")");
  return in;
}

json method_rows(const std::vector<arcquant::MethodResult>& results, Index& violations) {
  json rows = json::array();
  for (const auto& m : results) {
    json row = arcquant::to_json(m.report);
    row["method"] = m.method;
    violations += m.report.violations;
    rows.push_back(row);
  }
  return rows;
}

int cmd_simulate(const RunConfig& cfg, const std::string& act, const std::string& wt, bool with_layer) {
  const arcquant::FormatSpec spec = arcquant::format_by_name(cfg.format);
  const LayerInputs in = read_layer(act, wt);
  const arcquant::CalibrationProfile profile = load_or_build_profile(cfg, in.x);

  arcquant::CompareOptions options;
  options.alpha = cfg.alpha;
  options.seed = cfg.seed;
  Index violations = 0;
  json rows = method_rows(arcquant::compare_methods(in.x, in.w, spec, profile, options), violations);

  json extra = json::object();
  extra["s"] = profile.s;
  extra["k_in"] = profile.k_in();
  if (with_layer) {
    const arcquant::SimulationResult sim = arcquant::simulate_linear_layer(in.x, in.w, profile, spec);
    const arcquant::CostEstimate cost =
        arcquant::cost_model(arcquant::GemmShape{in.x.rows(), in.x.cols(), in.w.rows()}, profile.s);
    extra["augmented_cols"] = sim.operands.act.outliers;
    extra["flops"] = cost.flops;
    extra["overhead"] = cost.overhead_ratio;
  }
  emit_report(cfg, with_layer ? "simulate" : "compare", &spec, rows, extra);
  return violations == 0 ? 0 : 1;
}

int cmd_verify(const RunConfig& cfg, Index samples, Index configs, bool inject_fault) {
  arcquant::SuiteOptions options;
  options.samples = samples;
  options.gemm_configs = configs;
  options.seed = cfg.seed;
  options.inject_fault = inject_fault;
  const auto checks = arcquant::run_bound_suite(options);

  Index violations = 0;
  bool all_passed = true;
  json rows = json::array();
  for (const auto& c : checks) {
    violations += c.violations;
    all_passed = all_passed && c.passed();
    rows.push_back(arcquant::to_json(c));
  }
  const arcquant::FormatSpec spec = arcquant::FormatSpec::nvfp4();
  emit_report(cfg, "verify-bounds", &spec, rows,
              json{{"samples", samples}, {"total_violations", violations}, {"passed", all_passed}});
  return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (!arcquant::precision_identity_holds()) {
    std::cerr << "arcquant: precision identity eps(E2M1)^2 == eps(E4M3) does not hold\n";
    return 2;
  }

  CLI::App app{"Dual-stage NVFP4 quantization with augmented residual channels"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string emit = "text";
  Index s_override = -1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    sub->add_option("--emit", emit, "Output format")->check(CLI::IsMember({"text", "json", "csv"}))->capture_default_str();
    sub->add_option("--out", cfg.out, "Output path");
  };
  auto add_quant = [&](CLI::App* sub) {
    sub->add_option("--format", cfg.format, "Block format")
        ->check(CLI::IsMember({"nvfp4", "mxfp4", "mxfp6", "mxfp6-e3m2", "mxfp8", "mxfp8-e5m2", "int4"}))
        ->capture_default_str();
    sub->add_option("--profile", cfg.profile, "Calibration profile JSON");
    sub->add_option("--s-override", s_override, "Override the number of outlier channels")
        ->check(CLI::NonNegativeNumber);
  };

  auto* formats = app.add_subcommand("formats", "Print the block format table");
  add_common(formats);

  Index gen_k = 256, gen_n = 64, gen_outliers = 1;
  double gen_scale = 64.0;
  auto* gen = app.add_subcommand("gen", "Write synthetic outlier activations");
  add_common(gen);
  gen->add_option("--k", gen_k, "Channels")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--n", gen_n, "Rows")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--outliers", gen_outliers, "Amplified channels")->check(CLI::NonNegativeNumber)->capture_default_str();
  gen->add_option("--outlier-scale", gen_scale, "Amplification factor")->capture_default_str();

  std::vector<std::string> cal_inputs;
  std::string layer = "layer";
  auto* calibrate = app.add_subcommand("calibrate", "Build a calibration profile from activation tensors");
  add_common(calibrate);
  calibrate->add_option("inputs", cal_inputs, "Activation tensor files")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--layer", layer, "Layer name")->capture_default_str();
  calibrate->add_option("--s-override", s_override, "Override the number of outlier channels")
      ->check(CLI::NonNegativeNumber);

  std::string q_input;
  bool q_weight = false;
  auto* quantize = app.add_subcommand("quantize", "Quantize one tensor file");
  add_common(quantize);
  add_quant(quantize);
  quantize->add_option("input", q_input, "Tensor file")->required()->check(CLI::ExistingFile);
  quantize->add_flag("--weight", q_weight, "Treat the input as a weight (K_in along columns)");

  std::string act_path, wt_path;
  auto add_layer = [&](CLI::App* sub) {
    add_common(sub);
    add_quant(sub);
    sub->add_option("--act", act_path, "Activation tensor (N x K_in)")->required()->check(CLI::ExistingFile);
    sub->add_option("--wt", wt_path, "Weight tensor (M x K_in)")->required()->check(CLI::ExistingFile);
    sub->add_option("--alpha", cfg.alpha, "Smoothing migration strength")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
  };
  auto* simulate = app.add_subcommand("simulate", "Simulate one linear layer through every method");
  add_layer(simulate);
  auto* compare = app.add_subcommand("compare", "Compare rtn, smooth, hadamard and arcquant");
  add_layer(compare);

  Index samples = 1'000'000, configs = 100;
  bool inject_fault = false;
  auto* verify = app.add_subcommand("verify-bounds", "Run the error-bound invariant suite");
  add_common(verify);
  verify->add_option("--samples", samples, "Samples per statistical check")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  verify->add_option("--configs", configs, "Random GEMM shapes")->check(CLI::PositiveNumber)->capture_default_str();
  verify->add_flag("--inject-fault", inject_fault, "Corrupt one stage of every check")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  cfg.emit = emit == "json" ? Emit::Json : emit == "csv" ? Emit::Csv : Emit::Text;
  if (s_override >= 0) cfg.s_override = s_override;

  try {
    if (formats->parsed()) return cmd_formats(cfg);
    if (gen->parsed()) return cmd_gen(cfg, gen_k, gen_n, gen_outliers, gen_scale);
    if (calibrate->parsed()) return cmd_calibrate(cfg, cal_inputs, layer);
    if (quantize->parsed()) return cmd_quantize(cfg, q_input, q_weight);
    if (simulate->parsed()) return cmd_simulate(cfg, act_path, wt_path, true);
    if (compare->parsed()) return cmd_simulate(cfg, act_path, wt_path, false);
    if (verify->parsed()) return cmd_verify(cfg, samples, configs, inject_fault);
  } catch (const std::exception& e) {
    std::cerr << "arcquant: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
