//! Well-known namespaces.

pub const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS_NS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const XSD_NS: &str = "http://www.w3.org/2001/XMLSchema#";
pub const OWL_NS: &str = "http://www.w3.org/2002/07/owl#";
pub const SOSA_NS: &str = "http://www.w3.org/ns/sosa/";

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";

/// `owl:rational`, lexical form `n/d`. Used for exact results that have no
/// finite decimal expansion (e.g. 25/27).
pub const OWL_RATIONAL: &str = "http://www.w3.org/2002/07/owl#rational";

pub mod xsd {
    pub const STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
    pub const BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";
    pub const INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
    pub const INT: &str = "http://www.w3.org/2001/XMLSchema#int";
    pub const LONG: &str = "http://www.w3.org/2001/XMLSchema#long";
    pub const DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";
    pub const DOUBLE: &str = "http://www.w3.org/2001/XMLSchema#double";
    pub const FLOAT: &str = "http://www.w3.org/2001/XMLSchema#float";
}

/// Prefixes recognized without a declaration, in both Turtle and queries.
pub const DEFAULT_PREFIXES: [(&str, &str); 5] = [
    ("rdf", RDF_NS),
    ("rdfs", RDFS_NS),
    ("xsd", XSD_NS),
    ("owl", OWL_NS),
    ("sosa", SOSA_NS),
];

pub fn default_prefix(prefix: &str) -> Option<&'static str> {
    DEFAULT_PREFIXES.iter().find(|(p, _)| *p == prefix).map(|(_, ns)| *ns)
}
