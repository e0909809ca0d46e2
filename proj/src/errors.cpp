#include "laf/errors.hpp"

namespace laf {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::negative_coordinate: return "NegativeCoordinate";
    case Errc::start_after_end: return "StartAfterEnd";
    case Errc::wrong_arity: return "WrongArity";
    case Errc::out_of_extent: return "OutOfExtent";
    case Errc::cross_document: return "CrossDocumentComparison";
    case Errc::duplicate_id: return "DuplicateId";
    case Errc::malformed_id: return "MalformedId";
    case Errc::unresolved_reference: return "UnresolvedReference";
    case Errc::target_cycle: return "TargetCycle";
    case Errc::layer_cycle: return "LayerCycle";
    case Errc::layer_not_grounded: return "LayerNotGrounded";
    case Errc::mixed_pid_targets: return "MixedPidTargets";
    case Errc::group_malformed: return "GroupMalformed";
    case Errc::not_coextensive: return "NotCoextensive";
    case Errc::unknown_node: return "UnknownNode";
    case Errc::unsealed_document: return "UnsealedDocument";
    case Errc::precondition: return "PreconditionViolated";
    case Errc::bad_magic: return "BadMagic";
    case Errc::unknown_record_kind: return "UnknownRecordKind";
    case Errc::arity_error: return "ArityError";
    case Errc::unresolved_at_end: return "UnresolvedAtEnd";
    case Errc::count_mismatch: return "CountMismatch";
    case Errc::hash_mismatch: return "HashMismatch";
    case Errc::dangling_escape: return "DanglingEscape";
    case Errc::unknown_escape: return "UnknownEscape";
    case Errc::trailing_data: return "TrailingData";
    case Errc::duplicate_entry_id: return "DuplicateEntryId";
    case Errc::unknown_value_ref: return "UnknownValueRef";
    case Errc::kind_mismatch: return "KindMismatch";
    case Errc::missing_name: return "MissingName";
    case Errc::unknown_id: return "UnknownId";
    case Errc::not_a_descriptor: return "NotADescriptor";
    case Errc::unknown_target: return "UnknownTarget";
    case Errc::duplicate_scheme_name: return "DuplicateSchemeName";
    case Errc::local_entry_invalid: return "LocalEntryInvalid";
    case Errc::unmapped_category: return "UnmappedCategory";
    case Errc::compat_violation: return "CompatViolation";
    case Errc::no_preimage: return "NoPreimage";
    case Errc::ambiguous_preimage: return "AmbiguousPreimage";
    case Errc::malformed_pair: return "MalformedPair";
    case Errc::column_count_mismatch: return "ColumnCountMismatch";
    case Errc::unbalanced_parens: return "UnbalancedParens";
    case Errc::empty_label: return "EmptyLabel";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::primary_mismatch: return "PrimaryMismatch";
    case Errc::layer_id_clash: return "LayerIdClash";
    case Errc::unknown_layer: return "UnknownLayer";
    case Errc::unknown_descriptor: return "UnknownDescriptor";
    case Errc::io_error: return "IoError";
  }
  return "Unknown";
}

std::string Error::format(Errc code, const std::string& message,
                          std::size_t line) {
  std::string out = errc_name(code);
  out += ": ";
  out += message;
  if (line) {
    out += " (line ";
    out += std::to_string(line);
    out += ")";
  }
  return out;
}

}  // namespace laf
