use anyhow::Result;
use clap::Args;
use serde::Serialize;

use qnull::theory::{lambda_asymptotic, lambda_expected, NullTheoryPrediction};

#[derive(Args, Debug)]
pub struct TheoryArgs {
    /// Rank of the true state.
    #[arg(long)]
    pub r: usize,
    /// Hilbert-space dimension.
    #[arg(long)]
    pub d: usize,
    /// Also report the large-d asymptotic form.
    #[arg(long)]
    pub asymptotic: bool,
}

#[derive(Serialize)]
struct TheoryOutput {
    #[serde(flatten)]
    prediction: NullTheoryPrediction,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_asymptotic: Option<f64>,
}

pub fn run(args: &TheoryArgs) -> Result<()> {
    let prediction = lambda_expected(args.r, args.d)?;
    let lambda_asymptotic = if args.asymptotic {
        Some(lambda_asymptotic(args.r, args.d)?)
    } else {
        None
    };
    let out = TheoryOutput {
        prediction,
        lambda_asymptotic,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}
