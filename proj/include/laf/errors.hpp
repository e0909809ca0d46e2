#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace laf {

enum class Errc {
  // anchors
  negative_coordinate,
  start_after_end,
  wrong_arity,
  out_of_extent,
  cross_document,
  // graph construction
  duplicate_id,
  malformed_id,
  unresolved_reference,
  target_cycle,
  layer_cycle,
  layer_not_grounded,
  mixed_pid_targets,
  group_malformed,
  not_coextensive,
  unknown_node,
  unsealed_document,
  precondition,
  // dump
  bad_magic,
  unknown_record_kind,
  arity_error,
  unresolved_at_end,
  count_mismatch,
  hash_mismatch,
  dangling_escape,
  unknown_escape,
  trailing_data,
  // registry / dcs
  duplicate_entry_id,
  unknown_value_ref,
  kind_mismatch,
  missing_name,
  unknown_id,
  not_a_descriptor,
  unknown_target,
  duplicate_scheme_name,
  local_entry_invalid,
  unmapped_category,
  compat_violation,
  no_preimage,
  ambiguous_preimage,
  // transducers
  malformed_pair,
  column_count_mismatch,
  unbalanced_parens,
  empty_label,
  shape_mismatch,
  // layerops
  primary_mismatch,
  layer_id_clash,
  unknown_layer,
  unknown_descriptor,
  // io
  io_error,
};

const char* errc_name(Errc code);

/// Toolkit-wide exception. `line()` is 1-based when the error is anchored to
/// an input line, 0 otherwise. `ids()` lists the offending identifiers when
/// there are several (e.g. every dangling reference at document close).
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string message, std::size_t line = 0,
        std::vector<std::string> ids = {})
      : std::runtime_error(format(code, message, line)),
        code_(code),
        line_(line),
        ids_(std::move(ids)) {}

  Errc code() const { return code_; }
  std::size_t line() const { return line_; }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  static std::string format(Errc code, const std::string& message,
                            std::size_t line);

  Errc code_;
  std::size_t line_;
  std::vector<std::string> ids_;
};

}  // namespace laf
