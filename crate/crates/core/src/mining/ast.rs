//! Normalized SQL parse summary for context extraction and verification.
//! Parsing sits on `sqlparser`; the summary pulls out the entities the miner
//! verifies against the live schema, and the kept statement list
//! re-serializes to an execution-equivalent statement.

use sqlparser::ast::{
    Expr, Join, Query, Select, SetExpr, Statement, TableFactor, TableWithJoins, Value as AstValue,
};
use sqlparser::dialect::GenericDialect;
use sqlparser::parser::Parser;

use super::MiningError;

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PredicateTriple {
    pub column: String,
    pub operator: String,
    pub literal: String,
}

#[derive(Debug, Clone, Default)]
pub struct SqlAst {
    pub select_items: Vec<String>,
    pub table_refs: Vec<String>,
    pub predicates: Vec<PredicateTriple>,
    pub group_keys: Vec<String>,
    pub order_keys: Vec<String>,
    pub cte_names: Vec<String>,
    pub limit: Option<String>,
    statements: Vec<Statement>,
}

impl SqlAst {
    pub fn statement_count(&self) -> usize {
        self.statements.len()
    }

    /// Re-serialize the parse tree.
    pub fn to_sql(&self) -> String {
        self.statements
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// CTE bodies in declaration order, as (name, sql) pairs.
    pub fn cte_bodies(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for stmt in &self.statements {
            if let Statement::Query(query) = stmt {
                if let Some(with) = &query.with {
                    for cte in &with.cte_tables {
                        out.push((cte.alias.name.value.clone(), cte.query.to_string()));
                    }
                }
            }
        }
        out
    }
}

/// Tolerant parse of the SELECT-centric subset.
pub fn parse_sql_ast(sql: &str) -> Result<SqlAst, MiningError> {
    let statements = Parser::parse_sql(&GenericDialect {}, sql)
        .map_err(|e| MiningError::UnparsableSql(e.to_string()))?;
    if statements.is_empty() {
        return Err(MiningError::UnparsableSql("empty statement".into()));
    }
    let mut ast = SqlAst {
        statements: statements.clone(),
        ..Default::default()
    };
    for stmt in &statements {
        if let Statement::Query(query) = stmt {
            walk_query(query, &mut ast, true);
        }
    }
    dedup_preserving(&mut ast.table_refs);
    dedup_preserving(&mut ast.select_items);
    Ok(ast)
}

fn dedup_preserving(items: &mut Vec<String>) {
    let mut seen = std::collections::BTreeSet::new();
    items.retain(|i| seen.insert(i.clone()));
}

fn walk_query(query: &Query, ast: &mut SqlAst, top: bool) {
    if let Some(with) = &query.with {
        for cte in &with.cte_tables {
            ast.cte_names.push(cte.alias.name.value.clone());
            walk_query(&cte.query, ast, false);
        }
    }
    walk_set_expr(&query.body, ast, top);
    if top {
        for ob in &query.order_by {
            ast.order_keys.push(ob.to_string());
        }
        if let Some(limit) = &query.limit {
            ast.limit = Some(limit.to_string());
        }
    }
}

fn walk_set_expr(body: &SetExpr, ast: &mut SqlAst, top: bool) {
    match body {
        SetExpr::Select(select) => walk_select(select, ast, top),
        SetExpr::Query(query) => walk_query(query, ast, false),
        SetExpr::SetOperation { left, right, .. } => {
            walk_set_expr(left, ast, top);
            walk_set_expr(right, ast, top);
        }
        _ => {}
    }
}

fn walk_select(select: &Select, ast: &mut SqlAst, top: bool) {
    if top {
        for item in &select.projection {
            ast.select_items.push(item.to_string());
        }
        if let sqlparser::ast::GroupByExpr::Expressions(exprs) = &select.group_by {
            for expr in exprs {
                ast.group_keys.push(expr.to_string());
            }
        }
    }
    for twj in &select.from {
        walk_table_with_joins(twj, ast);
    }
    if let Some(selection) = &select.selection {
        walk_predicates(selection, ast);
    }
    if let Some(having) = &select.having {
        walk_predicates(having, ast);
    }
}

fn walk_table_with_joins(twj: &TableWithJoins, ast: &mut SqlAst) {
    walk_table_factor(&twj.relation, ast);
    for Join { relation, .. } in &twj.joins {
        walk_table_factor(relation, ast);
    }
}

fn walk_table_factor(factor: &TableFactor, ast: &mut SqlAst) {
    match factor {
        TableFactor::Table { name, .. } => {
            let raw = name
                .0
                .iter()
                .map(|i| i.value.clone())
                .collect::<Vec<_>>()
                .join(".");
            ast.table_refs.push(raw);
        }
        TableFactor::Derived { subquery, .. } => walk_query(subquery, ast, false),
        TableFactor::NestedJoin {
            table_with_joins, ..
        } => walk_table_with_joins(table_with_joins, ast),
        _ => {}
    }
}

fn expr_column(expr: &Expr) -> Option<String> {
    match expr {
        Expr::Identifier(ident) => Some(ident.value.clone()),
        Expr::CompoundIdentifier(parts) => parts.last().map(|i| i.value.clone()),
        Expr::Nested(inner) => expr_column(inner),
        _ => None,
    }
}

fn expr_literal(expr: &Expr) -> Option<String> {
    match expr {
        Expr::Value(v) => Some(match v {
            AstValue::SingleQuotedString(s) | AstValue::DoubleQuotedString(s) => s.clone(),
            other => other.to_string(),
        }),
        Expr::Nested(inner) => expr_literal(inner),
        _ => None,
    }
}

fn walk_predicates(expr: &Expr, ast: &mut SqlAst) {
    match expr {
        Expr::BinaryOp { left, op, right } => {
            let op_str = op.to_string();
            if op_str == "AND" || op_str == "OR" {
                walk_predicates(left, ast);
                walk_predicates(right, ast);
                return;
            }
            match (expr_column(left), expr_literal(right)) {
                (Some(column), Some(literal)) => {
                    ast.predicates.push(PredicateTriple {
                        column,
                        operator: op_str,
                        literal,
                    });
                }
                _ => {
                    // Literal on the left, or nested expressions.
                    if let (Some(literal), Some(column)) = (expr_literal(left), expr_column(right))
                    {
                        ast.predicates.push(PredicateTriple {
                            column,
                            operator: op_str,
                            literal,
                        });
                    } else {
                        walk_predicates(left, ast);
                        walk_predicates(right, ast);
                    }
                }
            }
        }
        Expr::InList { expr, list, .. } => {
            if let Some(column) = expr_column(expr) {
                let literal = list
                    .iter()
                    .filter_map(expr_literal)
                    .collect::<Vec<_>>()
                    .join(", ");
                ast.predicates.push(PredicateTriple {
                    column,
                    operator: "IN".into(),
                    literal,
                });
            }
        }
        Expr::Between {
            expr, low, high, ..
        } => {
            if let (Some(column), Some(lo), Some(hi)) =
                (expr_column(expr), expr_literal(low), expr_literal(high))
            {
                ast.predicates.push(PredicateTriple {
                    column,
                    operator: "BETWEEN".into(),
                    literal: format!("{lo} AND {hi}"),
                });
            }
        }
        Expr::Like { expr, pattern, .. } | Expr::ILike { expr, pattern, .. } => {
            if let (Some(column), Some(literal)) = (expr_column(expr), expr_literal(pattern)) {
                ast.predicates.push(PredicateTriple {
                    column,
                    operator: "LIKE".into(),
                    literal,
                });
            }
        }
        Expr::Nested(inner) => walk_predicates(inner, ast),
        Expr::UnaryOp { expr, .. } => walk_predicates(expr, ast),
        _ => {}
    }
}
