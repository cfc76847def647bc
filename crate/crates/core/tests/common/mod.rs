pub mod expr_ref;
