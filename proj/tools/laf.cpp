// laf — stand-off annotation toolkit: legacy-format transducers around a
// canonical stream-capable dump format, a data category registry, and
// layer-level merge/extract/diff/validate operations.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "laf/dcr.hpp"
#include "laf/dump.hpp"
#include "laf/errors.hpp"
#include "laf/layerops.hpp"
#include "laf/registry_server.hpp"
#include "laf/transducers.hpp"
#include "laf/util.hpp"

namespace {

using namespace laf;

constexpr int kExitOk = 0;
constexpr int kExitFindings = 1;
constexpr int kExitInput = 2;
constexpr int kExitInternal = 3;

std::string registry_path(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("LAF_REGISTRY")) return env;
  throw Error(Errc::io_error, "no registry: pass --registry or set LAF_REGISTRY");
}

Registry load_registry(const std::string& flag) {
  std::string path = registry_path(flag);
  return Registry::load(read_file(path), path);
}

DCS load_dcs(const std::string& path, const Registry& reg) {
  return DCS::load(read_file(path), reg);
}

/// Output files are complete or absent: write to a temporary, rename last.
void write_output(const std::string& path, std::string_view bytes) {
  std::string tmp = path + ".tmp";
  try {
    write_file(tmp, bytes);
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

Document read_dump_file(const std::string& path) {
  std::string base = std::filesystem::path(path).parent_path().string();
  ReadOptions opts;
  opts.base_dir = base;
  return read_dump(read_file(path), opts);
}

struct IngestArgs {
  std::string format, dcs, registry, input, out;
};
struct EmitArgs {
  std::string format, dcs, input, out;
};
struct NormalizeArgs {
  std::string dcs, registry, input, out;
};
struct ExtractArgs {
  std::string layers, input, out;
};
struct MergeArgs {
  std::vector<std::string> inputs;
  std::string out;
};
struct DiffArgs {
  std::string layer_a, layer_b, descriptor, registry, input;
};
struct ValidateArgs {
  std::string registry, constraints, dcs, input;
};
struct LookupArgs {
  std::string id, lang = "en", registry;
};
struct ServeArgs {
  std::string socket, registry;
  std::size_t max_requests = 0;
};

int run_ingest(const IngestArgs& a) {
  Registry reg = load_registry(a.registry);
  DCS dcs = load_dcs(a.dcs, reg);
  std::string input = read_file(a.input);
  Document doc;
  if (a.format == "inline") {
    doc = ingest_inline(input, dcs, reg);
  } else if (a.format == "columnar") {
    doc = ingest_columnar(input, dcs, reg);
  } else if (a.format == "brackets") {
    doc = ingest_brackets(input, dcs, reg);
  } else {
    throw Error(Errc::io_error, "unknown format '" + a.format + "'");
  }
  write_output(a.out, write_dump(doc, /*canonical=*/true));
  return kExitOk;
}

int run_emit(const EmitArgs& a) {
  Document doc = read_dump_file(a.input);
  // emission only consults the mapping tables, never the registry
  DCS dcs = DCS::parse(read_file(a.dcs));
  std::string out;
  if (a.format == "inline") {
    out = emit_inline(doc, dcs);
  } else if (a.format == "columnar") {
    out = emit_columnar(doc, dcs);
  } else if (a.format == "brackets") {
    out = emit_brackets(doc, dcs);
  } else {
    throw Error(Errc::io_error, "unknown format '" + a.format + "'");
  }
  write_output(a.out, out);
  return kExitOk;
}

int run_normalize(const NormalizeArgs& a) {
  Registry reg = load_registry(a.registry);
  DCS dcs = load_dcs(a.dcs, reg);
  Document doc = read_dump_file(a.input);
  write_output(a.out, write_dump(dcs_apply(doc, dcs, reg), /*canonical=*/true));
  return kExitOk;
}

int run_extract(const ExtractArgs& a) {
  Document doc = read_dump_file(a.input);
  std::vector<std::string> layers;
  for (std::string_view l : split(a.layers, ',')) {
    if (!l.empty()) layers.emplace_back(l);
  }
  write_output(a.out, write_dump(extract(doc, layers), /*canonical=*/true));
  return kExitOk;
}

int run_merge(const MergeArgs& a) {
  std::vector<Document> docs;
  for (const std::string& path : a.inputs) docs.push_back(read_dump_file(path));
  write_output(a.out, write_dump(merge(docs), /*canonical=*/true));
  return kExitOk;
}

int run_diff(const DiffArgs& a) {
  Registry reg = load_registry(a.registry);
  Document doc = read_dump_file(a.input);
  AgreementReport report = diff(doc, a.layer_a, a.layer_b, a.descriptor, reg);
  std::fputs(render_report(report).c_str(), stdout);
  return report.disagreements.empty() ? kExitOk : kExitFindings;
}

int run_validate(const ValidateArgs& a) {
  Registry reg = load_registry(a.registry);
  if (!a.dcs.empty()) {
    DCS dcs = load_dcs(a.dcs, reg);
    reg = reg.merged_with(dcs.local_entries);
  }
  ConstraintSet constraints;
  if (!a.constraints.empty()) {
    constraints = ConstraintSet::load(read_file(a.constraints));
  }
  Document doc = read_dump_file(a.input);
  auto findings = validate(doc, reg, constraints);
  std::fputs(render_report(findings).c_str(), stdout);
  return findings.empty() ? kExitOk : kExitFindings;
}

int run_lookup(const LookupArgs& a) {
  Registry reg = load_registry(a.registry);
  Registry::EntryView view = reg.lookup(a.id, a.lang);
  std::string line = view.entry->id + "\t" + view.name + "\t" + view.definition;
  if (view.fallback) line += "\t(fallback: " + view.lang + ")";
  std::fputs((line + "\n").c_str(), stdout);
  return kExitOk;
}

int run_serve(const ServeArgs& a) {
  Registry reg = load_registry(a.registry);
  ServeOptions opts;
  opts.socket_path = a.socket;
  opts.max_requests = a.max_requests;
  serve_registry(reg, opts);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stand-off annotation toolkit"};
  app.require_subcommand(1);

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand("ingest", "transduce a legacy file to a dump");
  ingest->add_option("--format", ingest_args.format, "inline|columnar|brackets")
      ->required();
  ingest->add_option("--dcs", ingest_args.dcs, "scheme mapping file")->required();
  ingest->add_option("--registry", ingest_args.registry, "registry file");
  ingest->add_option("input", ingest_args.input, "legacy-format input")->required();
  ingest->add_option("--out", ingest_args.out, "dump output path")->required();

  EmitArgs emit_args;
  auto* emit = app.add_subcommand("emit", "transduce a dump back to a legacy file");
  emit->add_option("--format", emit_args.format, "inline|columnar|brackets")
      ->required();
  emit->add_option("--dcs", emit_args.dcs, "scheme mapping file")->required();
  emit->add_option("input", emit_args.input, "dump input")->required();
  emit->add_option("--out", emit_args.out, "legacy-format output path")->required();

  NormalizeArgs normalize_args;
  auto* normalize = app.add_subcommand("normalize", "map scheme-local categories to registry ids");
  normalize->add_option("--dcs", normalize_args.dcs)->required();
  normalize->add_option("--registry", normalize_args.registry);
  normalize->add_option("input", normalize_args.input, "dump input")->required();
  normalize->add_option("--out", normalize_args.out)->required();

  ExtractArgs extract_args;
  auto* extract_cmd = app.add_subcommand("extract", "extract layers plus their dependencies");
  extract_cmd->add_option("--layers", extract_args.layers, "comma-joined layer ids")
      ->required();
  extract_cmd->add_option("input", extract_args.input, "dump input")->required();
  extract_cmd->add_option("--out", extract_args.out)->required();

  MergeArgs merge_args;
  auto* merge_cmd = app.add_subcommand("merge", "merge dumps over shared primaries");
  merge_cmd->add_option("inputs", merge_args.inputs, "dump inputs")
      ->required()
      ->expected(-1);
  merge_cmd->add_option("--out", merge_args.out)->required();

  DiffArgs diff_args;
  auto* diff_cmd = app.add_subcommand("diff", "compare two layers on one descriptor");
  diff_cmd->add_option("--layer-a", diff_args.layer_a)->required();
  diff_cmd->add_option("--layer-b", diff_args.layer_b)->required();
  diff_cmd->add_option("--descriptor", diff_args.descriptor)->required();
  diff_cmd->add_option("--registry", diff_args.registry);
  diff_cmd->add_option("input", diff_args.input, "dump input")->required();

  ValidateArgs validate_args;
  auto* validate_cmd = app.add_subcommand("validate", "structural validation report");
  validate_cmd->add_option("--registry", validate_args.registry);
  validate_cmd->add_option("--constraints", validate_args.constraints,
                           "EMBED/APPLIES rule file");
  validate_cmd->add_option("--dcs", validate_args.dcs,
                           "merge this scheme's local entries into the registry view");
  validate_cmd->add_option("input", validate_args.input, "dump input")->required();

  auto* registry_cmd = app.add_subcommand("registry", "registry services");
  registry_cmd->require_subcommand(1);
  LookupArgs lookup_args;
  auto* lookup = registry_cmd->add_subcommand("lookup", "print name/definition");
  lookup->add_option("id", lookup_args.id, "concept id")->required();
  lookup->add_option("--lang", lookup_args.lang, "language code (default en)");
  lookup->add_option("--registry", lookup_args.registry);
  ServeArgs serve_args;
  auto* serve = registry_cmd->add_subcommand("serve", "serve lookups over a local socket");
  serve->add_option("--socket", serve_args.socket, "socket path")->required();
  serve->add_option("--registry", serve_args.registry);
  serve->add_option("--max-requests", serve_args.max_requests,
                    "exit after N requests (0 = run forever)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return run_ingest(ingest_args);
    if (*emit) return run_emit(emit_args);
    if (*normalize) return run_normalize(normalize_args);
    if (*extract_cmd) return run_extract(extract_args);
    if (*merge_cmd) return run_merge(merge_args);
    if (*diff_cmd) return run_diff(diff_args);
    if (*validate_cmd) return run_validate(validate_args);
    if (*lookup) return run_lookup(lookup_args);
    if (*serve) return run_serve(serve_args);
    std::fputs("no command\n", stderr);
    return kExitInput;
  } catch (const Error& e) {
    std::fprintf(stderr, "laf: %s\n", e.what());
    return kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "laf: internal error: %s\n", e.what());
    return kExitInternal;
  }
}
