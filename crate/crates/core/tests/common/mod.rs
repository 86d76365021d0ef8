#![allow(dead_code)]

pub mod bench;
pub mod gen;
pub mod oracle;
