use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// A lottery over goods and its price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MenuOption {
    pub lottery: Vec<f64>,
    pub price: f64,
}

impl MenuOption {
    pub fn new(lottery: Vec<f64>, price: f64) -> Self {
        MenuOption { lottery, price }
    }

    /// Deterministic bundle containing the listed goods.
    pub fn bundle(k: usize, goods: &[usize], price: f64) -> Self {
        let mut lottery = vec![0.0; k];
        for &i in goods {
            lottery[i] = 1.0;
        }
        MenuOption { lottery, price }
    }

    pub fn is_deterministic(&self) -> bool {
        self.lottery.iter().all(|&x| x == 0.0 || x == 1.0)
    }

    /// Goods allocated with certainty.
    pub fn goods(&self) -> Vec<usize> {
        (0..self.lottery.len()).filter(|&i| self.lottery[i] >= 1.0).collect()
    }

    pub fn is_null(&self) -> bool {
        self.lottery.iter().all(|&x| x == 0.0) && self.price == 0.0
    }
}

/// Options offered by the seller; the null option `(∅, 0)` is implicit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Menu {
    pub options: Vec<MenuOption>,
}

impl Menu {
    pub fn new(options: Vec<MenuOption>) -> Result<Self> {
        let menu = Menu { options };
        menu.validate()?;
        Ok(menu)
    }

    pub fn empty() -> Self {
        Menu::default()
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.options.first().map(|o| o.lottery.len())
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.dim().unwrap_or(0);
        for (j, o) in self.options.iter().enumerate() {
            if o.lottery.len() != k {
                return Err(Error::parse(
                    format!("options[{j}].lottery"),
                    format!("expected {k} entries, found {}", o.lottery.len()),
                ));
            }
            if let Some(i) = o.lottery.iter().position(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::parse(
                    format!("options[{j}].lottery"),
                    format!("entry {i} = {} outside [0, 1]", o.lottery[i]),
                ));
            }
            if !o.price.is_finite() {
                return Err(Error::parse(format!("options[{j}].price"), "price must be finite"));
            }
        }
        Ok(())
    }

    pub fn check_dim(&self, k: usize) -> Result<()> {
        match self.dim() {
            Some(d) if d != k => Err(Error::Argument(format!(
                "menu lotteries have {d} goods, scenario has {k}"
            ))),
            _ => Ok(()),
        }
    }

    /// Deterministic options totally ordered by inclusion.
    pub fn is_nested(&self) -> bool {
        if !self.options.iter().all(MenuOption::is_deterministic) {
            return false;
        }
        let mut sizes: Vec<(usize, &MenuOption)> =
            self.options.iter().map(|o| (o.goods().len(), o)).collect();
        sizes.sort_by_key(|(n, _)| *n);
        sizes.windows(2).all(|w| {
            let (small, large) = (w[0].1, w[1].1);
            w[0].0 < w[1].0
                && small
                    .lottery
                    .iter()
                    .zip(&large.lottery)
                    .all(|(s, l)| s <= l)
        })
    }

    /// Options sorted by the number of goods they contain, smallest first.
    pub fn chain(&self) -> Vec<MenuOption> {
        let mut opts = self.options.clone();
        opts.sort_by(|x, y| {
            let sx: f64 = x.lottery.iter().sum();
            let sy: f64 = y.lottery.iter().sum();
            sx.total_cmp(&sy).then(x.price.total_cmp(&y.price))
        });
        opts
    }

    /// Tier of each good: 1-based index of the smallest bundle containing it
    /// in a nested menu, `None` for goods never sold.
    pub fn tiers(&self, k: usize) -> Vec<Option<usize>> {
        let chain = self.chain();
        (0..k)
            .map(|i| chain.iter().position(|o| o.lottery[i] >= 1.0).map(|p| p + 1))
            .collect()
    }

    /// Parses `[{"lottery": [..], "price": ..}, ..]`, naming the offending
    /// field on failure.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: Value =
            serde_json::from_str(text).map_err(|e| Error::parse("<document>", e.to_string()))?;
        let items = match &doc {
            Value::Array(items) => items,
            Value::Object(obj) => obj
                .get("options")
                .and_then(Value::as_array)
                .ok_or_else(|| Error::parse("options", "expected an array of options"))?,
            _ => return Err(Error::parse("<document>", "expected an array of options")),
        };
        let mut options = Vec::with_capacity(items.len());
        for (j, item) in items.iter().enumerate() {
            let obj = item
                .as_object()
                .ok_or_else(|| Error::parse(format!("options[{j}]"), "expected an object"))?;
            let lottery = obj
                .get("lottery")
                .and_then(Value::as_array)
                .ok_or_else(|| {
                    Error::parse(format!("options[{j}].lottery"), "missing or not an array")
                })?
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    v.as_f64().ok_or_else(|| {
                        Error::parse(format!("options[{j}].lottery"), format!("entry {i} is not a number"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let price = obj
                .get("price")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::parse(format!("options[{j}].price"), "missing or not a number"))?;
            options.push(MenuOption { lottery, price });
        }
        Menu::new(options)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("menu serializes")
    }

    /// Largest price change between menus with matching options, or `None`
    /// when the option sets differ.
    pub fn price_distance(&self, other: &Menu) -> Option<f64> {
        if self.len() != other.len() {
            return None;
        }
        let mut worst = 0.0_f64;
        for (x, y) in self.chain().iter().zip(other.chain().iter()) {
            let same = x
                .lottery
                .iter()
                .zip(&y.lottery)
                .all(|(p, q)| (p - q).abs() <= 1e-6);
            if !same {
                return None;
            }
            worst = worst.max((x.price - y.price).abs());
        }
        Some(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        let menu = Menu::new(vec![
            MenuOption::bundle(2, &[1], 1.59),
            MenuOption::bundle(2, &[0, 1], 3.16),
        ])
        .unwrap();
        let back = Menu::from_json_str(&menu.to_json_string()).unwrap();
        assert_eq!(back, menu);
        assert!(menu.is_nested());
        assert_eq!(menu.tiers(2), vec![Some(2), Some(1)]);
    }

    #[test]
    fn parse_errors_name_the_field() {
        let err = Menu::from_json_str(r#"[{"lottery":[1,1],"price":"x"}]"#).unwrap_err();
        assert!(err.to_string().contains("options[0].price"), "{err}");
        let err = Menu::from_json_str(r#"[{"lottery":[1,2],"price":1}]"#).unwrap_err();
        assert!(err.to_string().contains("options[0].lottery"), "{err}");
    }

    #[test]
    fn nestedness() {
        let separate = Menu::new(vec![
            MenuOption::bundle(2, &[0], 1.0),
            MenuOption::bundle(2, &[1], 1.0),
        ])
        .unwrap();
        assert!(!separate.is_nested());
        let lottery = Menu::new(vec![MenuOption::new(vec![0.9, 1.0], 3.8)]).unwrap();
        assert!(!lottery.is_nested());
    }
}
