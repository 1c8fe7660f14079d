// Copyright 2026 The Synthfab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "synthfab/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <functional>
#include <set>

#include "synthfab/compositor.hpp"
#include "synthfab/context_mining.hpp"
#include "synthfab/foreground_lab.hpp"
#include "synthfab/image_io.hpp"
#include "synthfab/parallel.hpp"
#include "synthfab/rng.hpp"
#include "synthfab/selection.hpp"

namespace synthfab::pipeline {
namespace fs = std::filesystem;
namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr Stage kAllStages[] = {Stage::kGenForegrounds, Stage::kMineCdi, Stage::kGenBackgrounds,
                                Stage::kFilter,         Stage::kCompose, Stage::kMix,
                                Stage::kStats};

std::vector<fs::path> list_files(const fs::path& dir) {
  std::vector<fs::path> files;
  if (!fs::exists(dir)) return files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<fs::path> find_named(const fs::path& dir, const std::string& name) {
  std::vector<fs::path> out;
  for (const fs::path& p : list_files(dir)) {
    if (p.filename() == name) out.push_back(p);
  }
  return out;
}

json read_json(const fs::path& path) {
  const std::vector<std::uint8_t> bytes = read_file(path);
  try {
    return json::parse(bytes.begin(), bytes.end());
  } catch (const json::exception& e) {
    fail(Errc::kIoFailure, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const ojson& doc) {
  write_text_atomic(path, doc.dump(2) + "\n");
}

std::string digest_text(const std::string& text) {
  return digest_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string label_dir(const std::string& name) {
  std::string out = name;
  std::replace(out.begin(), out.end(), ' ', '_');
  return out;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<fs::path> list_cdis(const fs::path& dir) {
  require(fs::is_directory(dir), Errc::kConfigError, "cdi_dir " + dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const fs::path& p : list_files(dir)) {
    const std::string ext = lower(p.extension().string());
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(p);
  }
  require(!out.empty(), Errc::kConfigError, "cdi_dir " + dir.string() + " holds no images");
  return out;
}

std::string file_digest_or_missing(const std::optional<fs::path>& p) {
  if (!p) return "none";
  if (!fs::exists(*p)) return "missing";
  return file_digest(*p);
}

// One generation batch on disk.
struct Batch {
  fs::path dir;
  json meta;
};

void write_batch(const fs::path& dir, ojson meta, const std::vector<gateway::Candidate>& candidates,
                 int png_level) {
  ojson items = ojson::array();
  for (const gateway::Candidate& c : candidates) {
    const std::string file = std::to_string(c.seed) + "_" + std::to_string(c.index) + ".png";
    write_png(dir / file, c.image, png_level);
    items.push_back({{"file", file}, {"seed", c.seed}, {"index", c.index}});
  }
  meta["items"] = std::move(items);
  write_json(dir / "batch.json", meta);
}

std::vector<gateway::Candidate> read_batch(const Batch& batch) {
  std::vector<gateway::Candidate> out;
  for (const auto& item : batch.meta.at("items")) {
    gateway::Candidate c;
    c.image = read_image(batch.dir / item.at("file").get<std::string>());
    c.seed = item.at("seed").get<std::uint64_t>();
    c.index = item.at("index").get<int>();
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Batch> load_batches(const fs::path& root) {
  std::vector<Batch> out;
  for (const fs::path& p : find_named(root, "batch.json")) out.push_back({p.parent_path(), read_json(p)});
  return out;
}

std::string csv_name(std::string group) {
  std::replace(group.begin(), group.end(), '/', '_');
  std::replace(group.begin(), group.end(), ' ', '_');
  return group + ".csv";
}

}  // namespace

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::kConfigError:
    case Errc::kInvalidLabel:
    case Errc::kUnknownTemplate:
      return kExitConfig;
    case Errc::kGatewayUnavailable:
    case Errc::kBadResponse:
      return kExitGateway;
    default:
      return kExitInvariant;
  }
}

void Logger::log(std::string_view stage, std::string_view event, Fields fields) {
  if (out_ == nullptr) return;
  std::string line = "stage=" + std::string(stage) + " event=" + std::string(event);
  for (const auto& [key, value] : fields) {
    line += ' ';
    line += key;
    line += '=';
    const bool quote = value.empty() || value.find_first_of(" \"=") != std::string::npos;
    if (quote) {
      line += '"';
      for (char c : value) {
        if (c == '"' || c == '\\') line += '\\';
        line += c;
      }
      line += '"';
    } else {
      line += value;
    }
  }
  std::lock_guard lock(mutex_);
  *out_ << line << '\n';
  out_->flush();
}

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::kGenForegrounds: return "gen-foregrounds";
    case Stage::kMineCdi: return "mine-cdi";
    case Stage::kGenBackgrounds: return "gen-backgrounds";
    case Stage::kFilter: return "filter";
    case Stage::kCompose: return "compose";
    case Stage::kMix: return "mix";
    case Stage::kStats: return "stats";
  }
  return "unknown";
}

std::optional<Stage> parse_stage(std::string_view name) {
  for (Stage s : kAllStages) {
    if (name == stage_name(s)) return s;
  }
  return std::nullopt;
}

Pipeline::Pipeline(PipelineConfig config, fs::path workspace, gateway::Gateway& gateway,
                   Logger& logger)
    : config_(std::move(config)),
      workspace_(std::move(workspace)),
      gateway_(gateway),
      log_(logger),
      templates_(config_.load_templates()) {
  config_.validate();
}

fs::path Pipeline::final_dataset_dir() const {
  return workspace_ / (config_.mix.real_manifest ? "mixed" : "dataset");
}

std::vector<Stage> Pipeline::planned_stages() const {
  std::vector<Stage> out{Stage::kGenForegrounds};
  if (config_.cdi_dir && config_.recipe != Recipe::kSynFg) out.push_back(Stage::kMineCdi);
  out.push_back(Stage::kGenBackgrounds);
  out.push_back(Stage::kFilter);
  out.push_back(Stage::kCompose);
  if (config_.mix.real_manifest) out.push_back(Stage::kMix);
  out.push_back(Stage::kStats);
  return out;
}

std::vector<Stage> Pipeline::prerequisites(Stage stage) const {
  switch (stage) {
    case Stage::kGenForegrounds:
    case Stage::kMineCdi:
      return {};
    case Stage::kGenBackgrounds:
      if (config_.cdi_dir && config_.recipe != Recipe::kSynFg) return {Stage::kMineCdi};
      return {};
    case Stage::kFilter:
      return {Stage::kGenForegrounds, Stage::kGenBackgrounds};
    case Stage::kCompose:
      return {Stage::kFilter};
    case Stage::kMix:
      return {Stage::kCompose};
    case Stage::kStats:
      return {config_.mix.real_manifest ? Stage::kMix : Stage::kCompose};
  }
  return {};
}

std::vector<fs::path> Pipeline::output_dirs(Stage stage) const {
  switch (stage) {
    case Stage::kGenForegrounds: return {workspace_ / "candidates" / "fg"};
    case Stage::kMineCdi: return {workspace_ / "mining"};
    case Stage::kGenBackgrounds: return {workspace_ / "candidates" / "bg"};
    case Stage::kFilter: return {workspace_ / "assets", workspace_ / "reports"};
    case Stage::kCompose: return {workspace_ / "dataset"};
    case Stage::kMix: return {workspace_ / "mixed"};
    case Stage::kStats: return {workspace_ / "stats"};
  }
  return {};
}

std::string Pipeline::compute_digest(Stage stage) const {
  const ojson full = to_json(config_);
  const std::string backend = full["gateway"]["backend"];
  ojson part;
  switch (stage) {
    case Stage::kGenForegrounds:
      part = {{"labels", full["labels"]}, {"templates", ojson::parse(templates_.to_json().dump())},
              {"n", config_.counts.fg_per_template}, {"image", full["image"]},
              {"seed", config_.master_seed}, {"backend", backend}};
      break;
    case Stage::kMineCdi: {
      ojson cdis = ojson::array();
      if (config_.cdi_dir) {
        for (const fs::path& p : list_cdis(*config_.cdi_dir)) {
          cdis.push_back({p.filename().string(), file_digest(p)});
        }
      }
      part = {{"labels", full["labels"]}, {"cdis", cdis},
              {"captions", config_.counts.captions_per_cdi}, {"mining", full["mining"]},
              {"lexicon", file_digest_or_missing(config_.mining.noun_lexicon)},
              {"seed", config_.master_seed}, {"backend", backend}};
      break;
    }
    case Stage::kGenBackgrounds:
      part = {{"templates", ojson::parse(templates_.to_json().dump())},
              {"n", config_.counts.bg_per_template}, {"per_caption", config_.counts.bg_per_caption},
              {"image", full["image"]}, {"recipe", full["recipe"]},
              {"seed", config_.master_seed}, {"backend", backend}};
      break;
    case Stage::kFilter: {
      ojson keep = full["counts"];
      keep.erase("target_size");
      part = {{"labels", full["labels"]}, {"keep", keep},
              {"selection", full["selection"]}, {"extraction", full["extraction"]},
              {"backend", backend}};
      break;
    }
    case Stage::kCompose:
      part = {{"labels", full["labels"]}, {"augment", full["augment"]},
              {"target", config_.counts.target_size}, {"recipe", full["recipe"]},
              {"real", file_digest_or_missing(config_.real_dataset)},
              {"real_pastes", config_.mix.include_real_foreground_pastes},
              {"png_level", config_.image.png_level}, {"seed", config_.master_seed}};
      break;
    case Stage::kMix:
      part = {{"real", file_digest_or_missing(config_.mix.real_manifest)},
              {"fraction", config_.mix.real_fraction}};
      break;
    case Stage::kStats:
      part = ojson::object();
      break;
  }
  ojson upstream = ojson::array();
  for (Stage p : prerequisites(stage)) {
    const fs::path marker = workspace_ / "stages" / (std::string(stage_name(p)) + ".json");
    require(fs::exists(marker), Errc::kPipelineFailure,
            std::string("stage ") + stage_name(p) + " has not completed");
    const json m = read_json(marker);
    upstream.push_back({stage_name(p), m.at("digest"), digest_text(m.at("outputs").dump())});
  }
  return digest_text(ojson{{"stage", stage_name(stage)}, {"config", part}, {"upstream", upstream}}.dump());
}

bool Pipeline::verify_marker(Stage stage, const std::string& digest) const {
  const fs::path marker = workspace_ / "stages" / (std::string(stage_name(stage)) + ".json");
  if (!fs::exists(marker)) return false;
  json m;
  try {
    m = read_json(marker);
    if (m.at("digest").get<std::string>() != digest) return false;
    std::size_t seen = 0;
    for (const auto& [rel, hash] : m.at("outputs").items()) {
      const fs::path p = workspace_ / rel;
      if (!fs::exists(p) || file_digest(p) != hash.get<std::string>()) return false;
      ++seen;
    }
    std::size_t present = 0;
    for (const fs::path& dir : output_dirs(stage)) present += list_files(dir).size();
    return present == seen;
  } catch (const std::exception&) {
    return false;
  }
}

void Pipeline::write_marker(Stage stage, const std::string& digest) const {
  ojson outputs = ojson::object();
  for (const fs::path& dir : output_dirs(stage)) {
    for (const fs::path& p : list_files(dir)) {
      outputs[fs::relative(p, workspace_).generic_string()] = file_digest(p);
    }
  }
  write_json(workspace_ / "stages" / (std::string(stage_name(stage)) + ".json"),
             {{"stage", stage_name(stage)}, {"digest", digest}, {"outputs", outputs}});
}

StageOutcome Pipeline::run_stage(Stage stage) {
  if (const auto it = done_.find(stage); it != done_.end()) return it->second;
  for (Stage p : prerequisites(stage)) run_stage(p);

  fs::create_directories(workspace_ / "stages");
  StageOutcome outcome{stage, false, compute_digest(stage)};
  if (verify_marker(stage, outcome.digest)) {
    outcome.skipped = true;
    log_.log(stage_name(stage), "skip", {{"reason", "outputs up to date"}});
  } else {
    fs::remove(workspace_ / "stages" / (std::string(stage_name(stage)) + ".json"));
    for (const fs::path& dir : output_dirs(stage)) fs::remove_all(dir);
    for (const fs::path& dir : output_dirs(stage)) fs::create_directories(dir);
    log_.log(stage_name(stage), "start");
    const auto started = std::chrono::steady_clock::now();
    switch (stage) {
      case Stage::kGenForegrounds: gen_foregrounds(); break;
      case Stage::kMineCdi: mine_cdi(); break;
      case Stage::kGenBackgrounds: gen_backgrounds(); break;
      case Stage::kFilter: filter(); break;
      case Stage::kCompose: compose(); break;
      case Stage::kMix: mix(); break;
      case Stage::kStats: stats(); break;
    }
    write_marker(stage, outcome.digest);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    log_.log(stage_name(stage), "done", {{"elapsed_ms", std::to_string(ms.count())}});
  }
  done_[stage] = outcome;
  return outcome;
}

std::vector<StageOutcome> Pipeline::run() {
  write_json(workspace_ / "config.resolved.json", to_json(config_));
  std::vector<StageOutcome> out;
  for (Stage s : planned_stages()) out.push_back(run_stage(s));
  return out;
}

void Pipeline::gen_foregrounds() {
  struct Job {
    prompting::ClassLabel label;
    int template_id;
    std::string prompt;
  };
  std::vector<Job> jobs;
  for (const auto& label : config_.labels) {
    for (const auto& t : templates_.foreground()) {
      jobs.push_back({label, t.id, templates_.verbalize_foreground(label, t.id)});
    }
  }
  const fs::path root = workspace_ / "candidates" / "fg";
  parallel_for(jobs.size(), config_.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    const std::uint64_t seed = foreground::foreground_batch_seed(config_.master_seed, job.label,
                                                                 job.template_id);
    const auto candidates = gateway::generate_candidates(
        gateway_, job.prompt, config_.counts.fg_per_template, seed, config_.image.width,
        config_.image.height);
    write_batch(root / label_dir(job.label.name) / std::to_string(job.template_id),
                {{"kind", "foreground"},
                 {"label", {{"name", job.label.name}, {"id", job.label.id}}},
                 {"template_id", job.template_id},
                 {"prompt", job.prompt},
                 {"seed", seed}},
                candidates, config_.image.candidate_png_level);
    log_.log("gen-foregrounds", "batch",
             {{"label", job.label.name}, {"template", std::to_string(job.template_id)},
              {"images", std::to_string(candidates.size())}});
  });
}

void Pipeline::mine_cdi() {
  require(config_.cdi_dir.has_value(), Errc::kConfigError, "mine-cdi needs cdi_dir");
  const std::vector<fs::path> cdis = list_cdis(*config_.cdi_dir);
  const context::NounLexicon lexicon = config_.mining.noun_lexicon
                                           ? context::NounLexicon::from_file(*config_.mining.noun_lexicon)
                                           : context::NounLexicon::bundled();
  context::MiningOptions options;
  options.captions_per_cdi = config_.counts.captions_per_cdi;
  options.per_phrase = config_.mining.per_phrase;
  options.caption_edits = config_.mining.caption_edits;
  options.prompt_edits = config_.mining.prompt_edits;

  std::vector<std::vector<context::CaptionPrompts>> results(cdis.size());
  parallel_for(cdis.size(), config_.workers, [&](std::size_t i) {
    const Image image = read_image(cdis[i]);
    results[i] = context::mine_cdi_grouped(image, cdis[i].stem().string(), config_.labels, lexicon,
                                           gateway_, options);
  });

  ojson doc = ojson::array();
  std::size_t prompts = 0, empty = 0, flagged = 0;
  for (std::size_t i = 0; i < cdis.size(); ++i) {
    ojson captions = ojson::array();
    for (const auto& group : results[i]) {
      for (const std::string& p : group.prompts) {
        if (context::find_class_token(p, config_.labels) != std::string_view::npos) ++flagged;
      }
      prompts += group.prompts.size();
      empty += group.prompts.empty() ? 1 : 0;
      captions.push_back({{"rank", group.caption.rank},
                          {"text", group.caption.text},
                          {"prompts", group.prompts}});
    }
    doc.push_back({{"id", cdis[i].stem().string()},
                   {"file", cdis[i].filename().string()},
                   {"captions", captions}});
  }
  write_json(workspace_ / "mining" / "prompts.json", {{"cdis", doc}});
  log_.log("mine-cdi", "summary",
           {{"cdis", std::to_string(cdis.size())}, {"prompts", std::to_string(prompts)},
            {"captions_without_context", std::to_string(empty)},
            {"prompts_with_class_tokens", std::to_string(flagged)}});
}

void Pipeline::gen_backgrounds() {
  if (config_.recipe == Recipe::kSynFg) {
    log_.log("gen-backgrounds", "skip", {{"reason", "syn_fg uses real backgrounds only"}});
    return;
  }
  struct Job {
    std::string group;
    std::string prompt;
    int count;
    std::uint64_t seed;
    fs::path dir;
  };
  std::vector<Job> jobs;
  const fs::path root = workspace_ / "candidates" / "bg";
  for (const auto& t : templates_.background()) {
    jobs.push_back({"template/" + std::to_string(t.id), templates_.verbalize_background(t.id),
                    config_.counts.bg_per_template,
                    derive_seed(config_.master_seed, {hash_string("background"),
                                                      static_cast<std::uint64_t>(t.id)}),
                    root / "template" / std::to_string(t.id)});
  }
  if (config_.cdi_dir) {
    const json mined = read_json(workspace_ / "mining" / "prompts.json");
    for (const auto& cdi : mined.at("cdis")) {
      const std::string id = cdi.at("id").get<std::string>();
      for (const auto& cap : cdi.at("captions")) {
        const int rank = cap.at("rank").get<int>();
        const auto prompts = cap.at("prompts").get<std::vector<std::string>>();
        const int total = config_.counts.bg_per_caption;
        for (std::size_t j = 0; j < prompts.size(); ++j) {
          const int count = total / static_cast<int>(prompts.size()) +
                            (static_cast<int>(j) < total % static_cast<int>(prompts.size()) ? 1 : 0);
          if (count == 0) continue;
          jobs.push_back({"context/" + id + "/" + std::to_string(rank), prompts[j], count,
                          derive_seed(config_.master_seed,
                                      {hash_string("context"), hash_string(id),
                                       static_cast<std::uint64_t>(rank), j}),
                          root / "context" / id / std::to_string(rank) / std::to_string(j)});
        }
      }
    }
  }
  parallel_for(jobs.size(), config_.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    const auto candidates = gateway::generate_candidates(
        gateway_, job.prompt, job.count, job.seed, config_.image.width, config_.image.height);
    write_batch(job.dir,
                {{"kind", "background"}, {"group", job.group}, {"prompt", job.prompt},
                 {"seed", job.seed}},
                candidates, config_.image.candidate_png_level);
    log_.log("gen-backgrounds", "batch",
             {{"group", job.group}, {"images", std::to_string(candidates.size())}});
  });
}

void Pipeline::filter() {
  const fs::path reports = workspace_ / "reports";
  const selection::SelectionPolicy fg_policy = config_.foreground_policy();

  ojson extraction = ojson::array();
  std::size_t fg_kept = 0, fg_assets = 0;
  for (const Batch& batch : load_batches(workspace_ / "candidates" / "fg")) {
    const prompting::ClassLabel label{batch.meta.at("label").at("name").get<std::string>(),
                                      batch.meta.at("label").at("id").get<int>()};
    const int template_id = batch.meta.at("template_id").get<int>();
    const std::string prompt = batch.meta.at("prompt").get<std::string>();
    auto scored = selection::score_batch(read_batch(batch), prompt, config_.labels, gateway_,
                                         fg_policy, label.name, config_.workers);
    const std::size_t generated = scored.size();
    selection::SelectionResult chosen = selection::select(std::move(scored), fg_policy);
    write_text_atomic(reports / "selection" / "fg" /
                          csv_name(label.name + "_" + std::to_string(template_id)),
                      selection::report_csv(chosen.report));

    foreground::BatchReport report;
    report.generated = generated;
    const auto assets = foreground::extract_batch(chosen.kept, label, template_id, prompt, fg_policy,
                                                  config_.extraction, report, config_.workers);
    for (const auto& a : assets) foreground::save_asset(workspace_ / "assets", a);
    fg_kept += report.kept;
    fg_assets += assets.size();

    ojson failures = ojson::array();
    for (const auto& f : report.failures) {
      failures.push_back({{"id", f.id}, {"error", errc_name(f.code)}, {"message", f.message}});
      log_.log("filter", "extraction_failed", {{"id", f.id}, {"reason", errc_name(f.code)}});
    }
    extraction.push_back({{"label", label.name}, {"template_id", template_id},
                          {"generated", report.generated}, {"kept", report.kept},
                          {"extracted", report.extracted}, {"failures", failures}});
    log_.log("filter", "foreground_batch",
             {{"label", label.name}, {"template", std::to_string(template_id)},
              {"generated", std::to_string(generated)}, {"kept", std::to_string(report.kept)},
              {"extracted", std::to_string(report.extracted)}});
  }
  write_json(reports / "extraction.json", {{"batches", extraction}});

  // Backgrounds are selected per group: one template, or one CDI caption.
  std::map<std::string, std::vector<Batch>> groups;
  for (Batch& b : load_batches(workspace_ / "candidates" / "bg")) {
    groups[b.meta.at("group").get<std::string>()].push_back(std::move(b));
  }
  ojson index = ojson::array();
  for (const auto& [group, batches] : groups) {
    const bool context_group = group.starts_with("context/");
    const selection::SelectionPolicy policy =
        context_group ? config_.context_policy() : config_.background_policy();
    std::vector<gateway::ScoredImage> scored;
    std::map<std::string, std::pair<std::string, std::string>> origin;  // id -> (file, prompt)
    for (const Batch& b : batches) {
      const std::string prompt = b.meta.at("prompt").get<std::string>();
      auto part = selection::score_batch(read_batch(b), prompt, config_.labels, gateway_, policy,
                                         {}, config_.workers);
      for (std::size_t k = 0; k < part.size(); ++k) {
        const std::string file = fs::relative(b.dir, workspace_).generic_string() + "/" +
                                 b.meta.at("items").at(k).at("file").get<std::string>();
        part[k].id = fs::relative(b.dir, workspace_ / "candidates" / "bg").generic_string() + "/" +
                     part[k].id;
        origin[part[k].id] = {file, prompt};
        part[k].image = Image();  // pixels are not needed past scoring
        scored.push_back(std::move(part[k]));
      }
    }
    const std::size_t generated = scored.size();
    selection::SelectionResult chosen = selection::select(std::move(scored), policy);
    write_text_atomic(reports / "selection" / "bg" / csv_name(group),
                      selection::report_csv(chosen.report));
    for (const auto& k : chosen.kept) {
      index.push_back({{"id", k.id},
                       {"file", origin[k.id].first},
                       {"group", group},
                       {"prompt", origin[k.id].second},
                       {"faithfulness", k.faithfulness},
                       {"composite", selection::composite_score(k, policy)}});
    }
    log_.log("filter", "background_group",
             {{"group", group}, {"generated", std::to_string(generated)},
              {"kept", std::to_string(chosen.kept.size())}});
  }
  write_json(workspace_ / "assets" / "bg" / "index.json", {{"backgrounds", index}});
  log_.log("filter", "summary",
           {{"foregrounds_kept", std::to_string(fg_kept)},
            {"foreground_assets", std::to_string(fg_assets)},
            {"backgrounds", std::to_string(index.size())}});
}

void Pipeline::compose() {
  std::vector<foreground::ForegroundAsset> foregrounds =
      foreground::load_assets(workspace_ / "assets");
  const std::size_t synthetic_fg = foregrounds.size();

  // Background sources: synthetic ones are read lazily from their files.
  std::vector<fs::path> synthetic_bg;
  std::vector<std::string> synthetic_bg_ids;
  if (config_.recipe != Recipe::kSynFg) {
    const json index = read_json(workspace_ / "assets" / "bg" / "index.json");
    for (const auto& entry : index.at("backgrounds")) {
      synthetic_bg.push_back(workspace_ / entry.at("file").get<std::string>());
      synthetic_bg_ids.push_back(entry.at("id").get<std::string>());
    }
  }
  std::vector<compositor::BackgroundAsset> real_bg;
  if (config_.recipe != Recipe::kPureSyn) {
    const dataset::Dataset real = dataset::load_coco(*config_.real_dataset);
    std::set<std::string> names;
    for (const auto& l : config_.labels) names.insert(l.name);
    for (const auto& c : real.categories) {
      require(names.contains(c.name), Errc::kCategoryMismatch,
              "real category '" + c.name + "' is not among the labels");
    }
    fs::path root = config_.real_dataset->parent_path();
    if (root.empty()) root = ".";
    real_bg = dataset::load_real_backgrounds(real, root);
    if (config_.recipe == Recipe::kSynPlusReal && config_.mix.include_real_foreground_pastes) {
      for (auto& a : dataset::extract_real_foregrounds(real, root)) foregrounds.push_back(std::move(a));
    }
  }
  const std::size_t bg_count = synthetic_bg.size() + real_bg.size();
  require(!foregrounds.empty(), Errc::kEmptyPool, "no foreground assets to paste");
  require(bg_count > 0, Errc::kEmptyPool, "no backgrounds to paste onto");

  const std::uint64_t compose_seed = derive_seed(config_.master_seed, {hash_string("compose")});
  const auto plans = compositor::plan_dataset(foregrounds.size(), bg_count,
                                              static_cast<std::size_t>(config_.counts.target_size),
                                              compose_seed, config_.augment.pastes_per_bg);
  dataset::CocoWriter writer(workspace_ / "dataset",
                             std::string("synthfab-") + recipe_name(config_.recipe),
                             config_.labels, {config_.master_seed, compose_seed},
                             config_.image.png_level);

  std::size_t instances = 0, empty = 0, skipped = 0;
  const std::size_t chunk = std::max<std::size_t>(16, static_cast<std::size_t>(config_.workers) * 4);
  for (std::size_t begin = 0; begin < plans.size(); begin += chunk) {
    const std::size_t end = std::min(plans.size(), begin + chunk);
    std::vector<compositor::CompositeSample> samples(end - begin);
    std::vector<std::vector<std::uint8_t>> encoded(end - begin);
    parallel_for(end - begin, config_.workers, [&](std::size_t k) {
      const compositor::SamplePlan& plan = plans[begin + k];
      compositor::BackgroundAsset loaded;
      const compositor::BackgroundAsset* bg;
      if (plan.background < synthetic_bg.size()) {
        loaded.id = synthetic_bg_ids[plan.background];
        loaded.image = to_rgb(read_image(synthetic_bg[plan.background]));
        bg = &loaded;
      } else {
        bg = &real_bg[plan.background - synthetic_bg.size()];
      }
      std::vector<const foreground::ForegroundAsset*> chosen;
      for (std::size_t f : plan.foregrounds) chosen.push_back(&foregrounds[f]);
      Rng rng(plan.seed);
      samples[k] = compositor::compose_sample(*bg, chosen, rng, config_.augment);
      samples[k].seed = plan.seed;
      encoded[k] = encode_png(samples[k].image, config_.image.png_level);
    });
    for (std::size_t k = 0; k < samples.size(); ++k) {
      instances += samples[k].instances.size();
      empty += samples[k].instances.empty() ? 1 : 0;
      skipped += static_cast<std::size_t>(samples[k].skipped);
      writer.add_encoded(samples[k], encoded[k]);
    }
  }
  const dataset::DatasetManifest manifest = writer.finish();
  log_.log("compose", "summary",
           {{"images", std::to_string(manifest.images.size())},
            {"instances", std::to_string(instances)},
            {"images_without_instances", std::to_string(empty)},
            {"skipped_pastes", std::to_string(skipped)},
            {"foreground_pool", std::to_string(foregrounds.size())},
            {"real_foregrounds", std::to_string(foregrounds.size() - synthetic_fg)},
            {"background_pool", std::to_string(bg_count)}});
}

void Pipeline::mix() {
  require(config_.mix.real_manifest.has_value(), Errc::kConfigError, "mix needs mix.real_manifest");
  dataset::MixSpec spec;
  spec.real_manifest = *config_.mix.real_manifest;
  spec.real_fraction = config_.mix.real_fraction;
  spec.include_real_foreground_pastes = config_.mix.include_real_foreground_pastes;
  const auto manifest =
      dataset::mix_files(workspace_ / "dataset" / "annotations.json", spec, workspace_ / "mixed");
  std::size_t real = 0;
  for (const auto& im : manifest.images) real += im.origin == dataset::Origin::kReal ? 1 : 0;
  log_.log("mix", "summary",
           {{"images", std::to_string(manifest.images.size())}, {"real", std::to_string(real)}});
}

void Pipeline::stats() {
  const dataset::Dataset ds = dataset::load_coco(final_dataset_dir() / "annotations.json");
  const dataset::DatasetStats s = dataset::dataset_stats(ds);
  write_json(workspace_ / "stats" / "stats.json", dataset::to_json(s));
  write_text_atomic(workspace_ / "stats" / "stats.txt", dataset::stats_table(s));
  log_.log("stats", "summary",
           {{"images", std::to_string(s.images)}, {"annotations", std::to_string(s.annotations)}});
}

ValidationResult validate_dataset(const fs::path& annotations_path) {
  ValidationResult result;
  const dataset::Dataset ds = dataset::load_coco(annotations_path);
  result.integrity = dataset::check_integrity(ds);
  fs::path root = annotations_path.parent_path();
  if (root.empty()) root = ".";
  for (const auto& im : ds.images) {
    if (!fs::exists(root / im.file_name)) ++result.missing_files;
  }
  return result;
}

}  // namespace synthfab::pipeline
