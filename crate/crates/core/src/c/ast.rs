//! Syntax tree for the analysed C subset.

use std::fmt;

use super::intrinsics::Intrinsic;
use super::lexer::Span;

/// Types as spelled in the analysed source.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CType {
    CamlValue,
    Pointer(Box<CType>),
    Integer(u8),
    Floating,
    Record(String),
    Unknown(String),
}

impl CType {
    pub fn is_value(&self) -> bool {
        matches!(self, CType::CamlValue)
    }

    pub fn is_pointer(&self) -> bool {
        matches!(self, CType::Pointer(_))
    }

    pub fn pointee(&self) -> Option<&CType> {
        match self {
            CType::Pointer(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_void(&self) -> bool {
        matches!(self, CType::Unknown(n) if n == "void")
    }

    pub fn pointer_to(self) -> CType {
        CType::Pointer(Box::new(self))
    }
}

impl fmt::Display for CType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CType::CamlValue => f.write_str("value"),
            CType::Pointer(t) if matches!(**t, CType::Pointer(_)) => write!(f, "{t}*"),
            CType::Pointer(t) => write!(f, "{t} *"),
            CType::Integer(w) => write!(f, "int{w}"),
            CType::Floating => f.write_str("double"),
            CType::Record(n) => write!(f, "struct {n}"),
            CType::Unknown(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Plus,
    Not,
    BitNot,
    Deref,
    AddrOf,
    PreInc,
    PreDec,
    PostInc,
    PostDec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Mul,
    Div,
    Rem,
    Add,
    Sub,
    Shl,
    Shr,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    BitAnd,
    BitXor,
    BitOr,
    LogAnd,
    LogOr,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Shl => "<<",
            BinaryOp::Shr => ">>",
            BinaryOp::Lt => "<",
            BinaryOp::Gt => ">",
            BinaryOp::Le => "<=",
            BinaryOp::Ge => ">=",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::BitAnd => "&",
            BinaryOp::BitXor => "^",
            BinaryOp::BitOr => "|",
            BinaryOp::LogAnd => "&&",
            BinaryOp::LogOr => "||",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Ident(String),
    Int(i128),
    Float(String),
    Str(String),
    Unary {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// `op` is set for compound assignments such as `+=`.
    Assign {
        op: Option<BinaryOp>,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Conditional {
        cond: Box<Expr>,
        then: Box<Expr>,
        otherwise: Box<Expr>,
    },
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
    },
    Index {
        base: Box<Expr>,
        index: Box<Expr>,
    },
    Member {
        base: Box<Expr>,
        field: String,
        arrow: bool,
    },
    Cast {
        ty: CType,
        operand: Box<Expr>,
    },
    SizeofType(CType),
    SizeofExpr(Box<Expr>),
    CompoundLiteral {
        ty: CType,
        init: Vec<Expr>,
    },
    InitList(Vec<Expr>),
    Comma(Vec<Expr>),
    /// An OCaml FFI macro recognised from the intrinsic table.
    Intrinsic {
        intrinsic: Intrinsic,
        name: String,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Name of the called function when the callee is a plain identifier.
    pub fn call_target(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Call { callee, .. } => match &callee.kind {
                ExprKind::Ident(n) => Some(n),
                _ => None,
            },
            _ => None,
        }
    }

    /// Visits this expression and every subexpression, children first, in
    /// left-to-right order.
    pub fn walk_post<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        for c in self.children() {
            c.walk_post(f);
        }
        f(self);
    }

    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Ident(_) | ExprKind::Int(_) | ExprKind::Float(_) | ExprKind::Str(_) => vec![],
            ExprKind::SizeofType(_) => vec![],
            ExprKind::Unary { operand, .. } | ExprKind::Cast { operand, .. } => vec![operand],
            ExprKind::SizeofExpr(e) => vec![e],
            ExprKind::Binary { lhs, rhs, .. } | ExprKind::Assign { lhs, rhs, .. } => vec![lhs, rhs],
            ExprKind::Conditional {
                cond,
                then,
                otherwise,
            } => vec![cond, then, otherwise],
            ExprKind::Call { callee, args } => {
                let mut v: Vec<&Expr> = vec![callee];
                v.extend(args.iter());
                v
            }
            ExprKind::Index { base, index } => vec![base, index],
            ExprKind::Member { base, .. } => vec![base],
            ExprKind::CompoundLiteral { init, .. } => init.iter().collect(),
            ExprKind::InitList(v) | ExprKind::Comma(v) => v.iter().collect(),
            ExprKind::Intrinsic { args, .. } => args.iter().collect(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, v: &[Expr]| -> fmt::Result {
            for (i, e) in v.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{e}")?;
            }
            Ok(())
        };
        match &self.kind {
            ExprKind::Ident(n) => f.write_str(n),
            ExprKind::Int(v) => write!(f, "{v}"),
            ExprKind::Float(s) => f.write_str(s),
            ExprKind::Str(s) => write!(f, "{s:?}"),
            ExprKind::Unary { op, operand } => match op {
                UnaryOp::Neg => write!(f, "-{operand}"),
                UnaryOp::Plus => write!(f, "+{operand}"),
                UnaryOp::Not => write!(f, "!{operand}"),
                UnaryOp::BitNot => write!(f, "~{operand}"),
                UnaryOp::Deref => write!(f, "*{operand}"),
                UnaryOp::AddrOf => write!(f, "&{operand}"),
                UnaryOp::PreInc => write!(f, "++{operand}"),
                UnaryOp::PreDec => write!(f, "--{operand}"),
                UnaryOp::PostInc => write!(f, "{operand}++"),
                UnaryOp::PostDec => write!(f, "{operand}--"),
            },
            ExprKind::Binary { op, lhs, rhs } => write!(f, "{lhs} {} {rhs}", op.symbol()),
            ExprKind::Assign { op, lhs, rhs } => match op {
                Some(op) => write!(f, "{lhs} {}= {rhs}", op.symbol()),
                None => write!(f, "{lhs} = {rhs}"),
            },
            ExprKind::Conditional {
                cond,
                then,
                otherwise,
            } => write!(f, "{cond} ? {then} : {otherwise}"),
            ExprKind::Call { callee, args } => {
                write!(f, "{callee}(")?;
                list(f, args)?;
                f.write_str(")")
            }
            ExprKind::Intrinsic { name, args, .. } => {
                write!(f, "{name}(")?;
                list(f, args)?;
                f.write_str(")")
            }
            ExprKind::Index { base, index } => write!(f, "{base}[{index}]"),
            ExprKind::Member { base, field, arrow } => {
                write!(f, "{base}{}{field}", if *arrow { "->" } else { "." })
            }
            ExprKind::Cast { ty, operand } => write!(f, "({ty}){operand}"),
            ExprKind::SizeofType(t) => write!(f, "sizeof({t})"),
            ExprKind::SizeofExpr(e) => write!(f, "sizeof({e})"),
            ExprKind::CompoundLiteral { ty, init } => {
                write!(f, "({ty}){{")?;
                list(f, init)?;
                f.write_str("}")
            }
            ExprKind::InitList(v) => {
                f.write_str("{")?;
                list(f, v)?;
                f.write_str("}")
            }
            ExprKind::Comma(v) => list(f, v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Declarator {
    pub name: String,
    pub ty: CType,
    pub init: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Decl(Vec<Declarator>),
    Expr(Expr),
    If {
        cond: Expr,
        then: Box<Stmt>,
        otherwise: Option<Box<Stmt>>,
    },
    While {
        cond: Expr,
        body: Box<Stmt>,
    },
    DoWhile {
        body: Box<Stmt>,
        cond: Expr,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Expr>,
        body: Box<Stmt>,
    },
    Switch {
        scrutinee: Expr,
        body: Box<Stmt>,
    },
    Case {
        value: Expr,
        body: Box<Stmt>,
    },
    Default(Box<Stmt>),
    Label {
        name: String,
        body: Box<Stmt>,
    },
    Goto(String),
    Break,
    Continue,
    Return(Option<Expr>),
    Block(Vec<Stmt>),
    /// CAMLparamN / CAMLxparamN with the registered names.
    CamlParam {
        intrinsic: Intrinsic,
        names: Vec<String>,
    },
    CamlLocal {
        names: Vec<String>,
    },
    CamlReturn(Option<Expr>),
    Empty,
    /// A construct outside the supported subset.
    Opaque(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: Option<String>,
    pub ty: CType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSig {
    pub name: String,
    pub returns: CType,
    pub params: Vec<Param>,
    pub variadic: bool,
    pub is_camlprim: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubFunction {
    pub sig: FunctionSig,
    pub locals: Vec<(String, CType)>,
    pub body: Vec<Stmt>,
}

impl StubFunction {
    pub fn name(&self) -> &str {
        &self.sig.name
    }

    pub fn is_camlprim(&self) -> bool {
        self.sig.is_camlprim
    }

    pub fn params(&self) -> &[Param] {
        &self.sig.params
    }

    /// Declared type of a parameter or local, most recent declaration first.
    pub fn var_type(&self, name: &str) -> Option<&CType> {
        self.locals
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .or_else(|| {
                self.sig
                    .params
                    .iter()
                    .find(|p| p.name.as_deref() == Some(name))
                    .map(|p| &p.ty)
            })
    }
}
