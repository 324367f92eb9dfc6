//! Table of OCaml FFI macros and runtime entry points with built-in meaning.
//!
//! This table is the one place that says which spellings are dereferences,
//! which are plain arithmetic on tagged integers, and which constants the
//! naked-pointer check can evaluate.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AllocKind {
    Block,
    Small,
    Custom,
    String,
    Boxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Intrinsic {
    CamlParam(usize),
    CamlXParam(usize),
    CamlLocal(usize),
    CamlReturn,
    EnterBlocking,
    LeaveBlocking,
    DataCustomVal,
    DataAbstractVal,
    /// Reads from inside an OCaml block (`Field`, `Double_val`, `Tag_val`, ...).
    FieldRead,
    /// Writes into an OCaml block (`Store_field`, ...).
    FieldWrite,
    /// Decodes an immediate; never touches the heap.
    IntVal,
    /// Encodes an immediate: `2k + 1`.
    ValInt,
    ValUnit,
    StringVal,
    Alloc(AllocKind),
    Failwith,
    RuntimeCall,
    /// A named integer constant with a known value.
    TagConstant(i64),
}

impl Intrinsic {
    /// Whether evaluating the intrinsic reads or writes OCaml heap memory.
    pub fn is_deref(self) -> bool {
        matches!(
            self,
            Intrinsic::FieldRead | Intrinsic::FieldWrite | Intrinsic::StringVal
        )
    }

    /// Whether the result points inside the OCaml block given as argument.
    pub fn yields_heap_pointer(self) -> bool {
        matches!(
            self,
            Intrinsic::DataCustomVal | Intrinsic::DataAbstractVal | Intrinsic::StringVal
        )
    }
}

/// Macro-like intrinsics used in expression position.
pub fn expression_macro(name: &str) -> Option<Intrinsic> {
    use Intrinsic::*;
    Some(match name {
        "Data_custom_val" | "Caml_ba_array_val" => DataCustomVal,
        "Data_abstract_val" => DataAbstractVal,
        "Field" | "Some_val" | "Double_val" | "Int32_val" | "Int64_val" | "Nativeint_val"
        | "Tag_val" | "Wosize_val" | "Hd_val" | "Byte" | "Byte_u" | "Double_field"
        | "Double_flat_field" | "Double_array_field" | "Caml_ba_data_val" | "Code_val"
        | "Closure_arity" => FieldRead,
        "Store_field" | "Store_double_field" | "Store_double_flat_field" | "Store_double_val"
        | "Store_double_array_field" => FieldWrite,
        "Int_val" | "Long_val" | "Bool_val" | "Unsigned_long_val" | "Unsigned_int_val"
        | "Is_block" | "Is_long" | "Is_none" | "Is_some" | "Is_exception_result" => IntVal,
        "Val_int" | "Val_long" | "Val_bool" | "Val_not" => ValInt,
        "String_val" | "Bytes_val" => StringVal,
        _ => return None,
    })
}

/// Statement macros that manage local roots.
pub fn statement_macro(name: &str) -> Option<Intrinsic> {
    use Intrinsic::*;
    let digit = |prefix: &str| -> Option<usize> {
        let n: usize = name.strip_prefix(prefix)?.parse().ok()?;
        (n <= 5).then_some(n)
    };
    if let Some(n) = digit("CAMLparam") {
        return Some(CamlParam(n));
    }
    if let Some(n) = digit("CAMLxparam") {
        return Some(CamlXParam(n));
    }
    if let Some(n) = digit("CAMLlocal") {
        return Some(CamlLocal(n));
    }
    match name {
        "CAMLxparamN" => Some(CamlXParam(1)),
        "CAMLlocalN" => Some(CamlLocal(1)),
        "CAMLreturn" | "CAMLreturn0" | "CAMLreturnT" | "CAMLnoreturn" => Some(CamlReturn),
        _ => None,
    }
}

/// Runtime functions with a built-in role. Other `caml_*` names are plain
/// runtime calls whose effects come from the summaries.
pub fn runtime_function(name: &str) -> Option<Intrinsic> {
    use Intrinsic::*;
    Some(match name {
        "caml_enter_blocking_section" => EnterBlocking,
        "caml_leave_blocking_section" => LeaveBlocking,
        "caml_failwith" | "caml_failwith_value" | "caml_invalid_argument"
        | "caml_invalid_argument_value" => Failwith,
        "caml_alloc" | "caml_alloc_tuple" | "caml_alloc_shr" | "caml_alloc_array"
        | "caml_alloc_float_array" | "caml_alloc_some" => Alloc(AllocKind::Block),
        "caml_alloc_small" => Alloc(AllocKind::Small),
        "caml_alloc_custom" | "caml_alloc_custom_mem" | "caml_alloc_final"
        | "caml_ba_alloc" | "caml_ba_alloc_dims" => Alloc(AllocKind::Custom),
        "caml_alloc_string" | "caml_alloc_initialized_string" | "caml_copy_string"
        | "caml_copy_string_array" | "caml_alloc_sprintf" => Alloc(AllocKind::String),
        "caml_copy_double" | "caml_copy_int32" | "caml_copy_int64" | "caml_copy_nativeint" => {
            Alloc(AllocKind::Boxed)
        }
        n if n.starts_with("caml_") => RuntimeCall,
        _ => return None,
    })
}

/// Integer constants from the OCaml headers, usable by constant propagation.
pub fn constant(name: &str) -> Option<(Intrinsic, i64)> {
    let v = match name {
        "Val_unit" => return Some((Intrinsic::ValUnit, 1)),
        "Val_emptylist" | "Val_false" | "Val_none" | "Val_int0" => 1,
        "Val_true" => 3,
        "Tag_cons" | "Tag_some" => 0,
        "NULL" => 0,
        "Forward_tag" => 250,
        "Abstract_tag" => 251,
        "String_tag" => 252,
        "Double_tag" => 253,
        "Double_array_tag" => 254,
        "Custom_tag" => 255,
        "Closure_tag" => 247,
        "Object_tag" => 248,
        "Infix_tag" => 249,
        "Lazy_tag" => 246,
        "No_scan_tag" => 251,
        _ => return None,
    };
    Some((Intrinsic::TagConstant(v), v))
}
