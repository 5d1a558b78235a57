//! Seed list grammar: comma-separated items, each a seed or an inclusive
//! `a..b` range. `1..3,7` is {1, 2, 3, 7}.

use std::collections::BTreeSet;

pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, String> {
    let mut seeds = BTreeSet::new();
    for item in spec.split(',').map(str::trim) {
        if item.is_empty() {
            return Err(format!("empty item in `{spec}`"));
        }
        let num = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| format!("bad seed `{s}` in `{spec}`"))
        };
        match item.split_once("..") {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("descending range `{item}`"));
                }
                seeds.extend(a..=b);
            }
            None => {
                seeds.insert(num(item)?);
            }
        }
    }
    Ok(seeds.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar() {
        assert_eq!(parse_seeds("1..3,7").unwrap(), vec![1, 2, 3, 7]);
        assert_eq!(parse_seeds("5").unwrap(), vec![5]);
        assert_eq!(parse_seeds("3,1..2,2").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("1..100").unwrap().len(), 100);
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("a").is_err());
        assert!(parse_seeds("1,,2").is_err());
    }
}
