use std::path::{Path, PathBuf};

use serde_json::json;

use tau_snn::data::{
    load_mnist_dir, load_series_csv, synth_images, synth_series, Dataset, LabeledImage, LabeledWindow,
};
use tau_snn::experiments::{firing_report, tau_sweep, tolerance_window, weight_stats, DEFAULT_TAU_LADDER};
use tau_snn::hwmap::{
    builtin_catalog, conversion_table, load_catalog, recommend_devices, to_hardware_tau, to_software_tau,
    TaskRequirement,
};
use tau_snn::network::{Architecture, TauSnn, DEFAULT_SERIES_WINDOW, IMAGE_CLASSES};
use tau_snn::numerics::Rng;
use tau_snn::training::{evaluate, load_checkpoint, save_checkpoint, train, Checkpoint, Task, TrainConfig};

use crate::output::{self, f4, fmt_tau, RunRecorder};
use crate::svg::{bar_chart, Bar};
use crate::{
    AnalyzeCommand, CliError, Command, ConvertArgs, DataArgs, DevicesArgs, Direction, EvaluateArgs, FiringArgs,
    HyperArgs, SweepArgs, TrainArgs, WeightsArgs,
};

const SERIES_TEST_FRACTION: f64 = 0.1;

pub(crate) fn dispatch(command: Command, argv: &[String]) -> Result<(), CliError> {
    match command {
        Command::Train(a) => cmd_train(a, argv),
        Command::Evaluate(a) => cmd_evaluate(a, argv),
        Command::Sweep(a) => cmd_sweep(a, argv),
        Command::Analyze(AnalyzeCommand::Weights(a)) => cmd_weights(a, argv),
        Command::Analyze(AnalyzeCommand::Firing(a)) => cmd_firing(a, argv),
        Command::Convert(a) => cmd_convert(a, argv),
        Command::Devices(a) => cmd_devices(a, argv),
    }
}

enum Data {
    Images(Dataset<LabeledImage>),
    Windows(Dataset<LabeledWindow>),
}

/// Evaluates `$body` with `$ds` bound to whichever dataset `$data` holds.
macro_rules! with_dataset {
    ($data:expr, $ds:ident => $body:expr) => {
        match $data {
            Data::Images($ds) => $body,
            Data::Windows($ds) => $body,
        }
    };
}

fn data_json(d: &DataArgs, window: Option<usize>) -> serde_json::Value {
    json!({
        "data": d.data,
        "synthetic": d.synthetic,
        "data_seed": d.data_seed,
        "window": window,
        "stride": d.stride,
        "train_limit": d.train_limit,
    })
}

fn load_data(task: Task, d: &DataArgs, window: usize) -> Result<Data, CliError> {
    let mut data = match (task, d.synthetic, &d.data) {
        (Task::Series, Some(n), _) => {
            let all = synth_series(n, window, &mut Rng::new(d.data_seed))?;
            Data::Windows(Dataset::split_tail(all, SERIES_TEST_FRACTION))
        }
        (_, Some(n), _) => {
            let all = synth_images(n, IMAGE_CLASSES, &mut Rng::new(d.data_seed))?;
            Data::Images(Dataset::split_tail(all, SERIES_TEST_FRACTION))
        }
        (Task::Series, None, Some(path)) => {
            let file = if path.is_dir() {
                path.join("series.csv")
            } else {
                path.clone()
            };
            let all = load_series_csv(&file, window, d.stride.unwrap_or(window))?;
            if all.is_empty() {
                return Err(CliError::Runtime(format!("{}: no complete windows", file.display())));
            }
            Data::Windows(Dataset::split_tail(all, SERIES_TEST_FRACTION))
        }
        (_, None, Some(dir)) => Data::Images(load_mnist_dir(dir, d.train_limit)?),
        (_, None, None) => {
            return Err(CliError::Usage(
                "no data: pass --data PATH or --synthetic N, or set TAU_SNN_DATA".into(),
            ))
        }
    };
    if let Some(limit) = d.train_limit {
        with_dataset!(&mut data, ds => ds.train.truncate(limit));
    }
    Ok(data)
}

fn architecture(task: Task, window: usize) -> Result<Architecture, CliError> {
    Ok(match task {
        Task::Series => Architecture::series_preset(window)?,
        Task::Static | Task::Dynamic => Architecture::image_preset(),
    })
}

fn train_config(task: Task, tau: f64, seed: u64, h: &HyperArgs) -> TrainConfig {
    TrainConfig {
        epochs: h.epochs.unwrap_or(task.default_epochs()),
        batch_size: h.batch,
        learning_rate: h.lr,
        optimizer: h.optimizer,
        seed,
        reset_mode: h.reset,
        ..TrainConfig::new(task, tau)
    }
}

fn check_increasing(taus: &[f64], flag: &str) -> Result<(), CliError> {
    if taus.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::Usage(format!("{flag} must be strictly increasing")));
    }
    Ok(())
}

fn cmd_train(a: TrainArgs, argv: &[String]) -> Result<(), CliError> {
    let window = a.data.window.unwrap_or(DEFAULT_SERIES_WINDOW);
    let data = load_data(a.task, &a.data, window)?;
    let arch = architecture(a.task, window)?;
    let config = train_config(a.task, a.tau, a.seed, &a.hyper);
    let mut rec = RunRecorder::new(&a.out, argv)?;

    let (model, history) = with_dataset!(&data, ds => train(&arch, ds, &config))?;
    for (i, (loss, acc)) in history.loss.iter().zip(&history.accuracy).enumerate() {
        println!("epoch {:>3}  loss {}  accuracy {}", i + 1, f4(*loss), f4(*acc));
    }

    let ckpt = rec.path("model.ckpt");
    save_checkpoint(&model, Some(&config), &ckpt)?;
    rec.record(ckpt);
    rec.write("history.csv", output::history_csv(&history))?;
    let window = (a.task == Task::Series).then_some(window);
    let manifest = rec.finish(
        json!({
            "train": config,
            "layer_sizes": arch.layer_sizes(),
            "t_steps": arch.t_steps(),
            "dataset": data_json(&a.data, window),
        }),
        Some(a.seed),
    )?;
    eprintln!("wrote {}", manifest.display());
    Ok(())
}

fn resolve_task(flag: Option<Task>, ckpt: &Checkpoint) -> Result<Task, CliError> {
    flag.or(ckpt.config.as_ref().map(|c| c.task))
        .ok_or_else(|| CliError::Usage("checkpoint records no task; pass --task".into()))
}

/// Series windows must match the model's step count.
fn checkpoint_window(model: &TauSnn, d: &DataArgs) -> Result<usize, CliError> {
    let t = model.architecture().t_steps();
    match d.window {
        Some(w) if w != t => Err(CliError::Usage(format!(
            "--window {w} does not match the checkpoint's {t} steps"
        ))),
        _ => Ok(t),
    }
}

fn held_out<E>(ds: &Dataset<E>) -> &[E] {
    if ds.test.is_empty() {
        &ds.train
    } else {
        &ds.test
    }
}

fn cmd_evaluate(a: EvaluateArgs, argv: &[String]) -> Result<(), CliError> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let task = resolve_task(a.task, &ckpt)?;
    let window = checkpoint_window(&ckpt.model, &a.data)?;
    let data = load_data(task, &a.data, window)?;
    let taus = if a.taus.is_empty() {
        vec![ckpt.model.lif_params().tau_discrete()]
    } else {
        a.taus.clone()
    };
    let rows = taus
        .iter()
        .map(|&t| {
            Ok((
                t,
                with_dataset!(&data, ds => evaluate(&ckpt.model, held_out(ds), task, t))?,
            ))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let csv = output::accuracy_csv(&rows);
    print!("{csv}");
    if let Some(out) = &a.out {
        let mut rec = RunRecorder::new(out, argv)?;
        rec.write("accuracy.csv", csv)?;
        rec.finish(
            json!({
                "checkpoint": a.checkpoint,
                "task": task,
                "taus": taus,
                "dataset": data_json(&a.data, Some(window)),
            }),
            ckpt.config.as_ref().map(|c| c.seed),
        )?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs, argv: &[String]) -> Result<(), CliError> {
    check_increasing(&a.train_taus, "--train-taus")?;
    check_increasing(&a.infer_taus, "--infer-taus")?;
    let window = a.data.window.unwrap_or(DEFAULT_SERIES_WINDOW);
    let data = load_data(a.task, &a.data, window)?;
    let arch = architecture(a.task, window)?;
    let mut rec = RunRecorder::new(&a.out, argv)?;

    let mut grid_csv = output::grid_header();
    let mut windows_csv = output::windows_header();
    for &seed in &a.seeds {
        let base = train_config(a.task, a.train_taus[0], seed, &a.hyper);
        let (grid, models) = with_dataset!(&data, ds => tau_sweep(&arch, ds, &a.train_taus, &a.infer_taus, &base))?;
        grid_csv.push_str(&output::grid_rows(&grid));

        // Without a matched diagonal, fall back to each row's own best cell.
        let shared_floor = grid.matched_floor(a.floor_margin);
        for (i, &tau_train) in grid.train_taus.iter().enumerate() {
            let row = &grid.accuracy[i];
            let floor = shared_floor.unwrap_or_else(|| row.iter().copied().fold(0.0, f64::max) - a.floor_margin);
            let window = tolerance_window(row, &grid.infer_taus, floor);
            windows_csv.push_str(&output::window_row(seed, tau_train, floor, window));
        }
        for (tau_train, accs) in grid.train_taus.iter().zip(&grid.accuracy) {
            let cells: Vec<String> = accs.iter().map(|&x| f4(x)).collect();
            println!("seed {seed} tau_train {:>4}: {}", fmt_tau(*tau_train), cells.join(" "));
        }

        if a.save_models {
            for (&tau_train, model) in grid.train_taus.iter().zip(&models) {
                let path = rec.path(&format!("models/seed{seed}_tau{}.ckpt", fmt_tau(tau_train)));
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
                }
                save_checkpoint(
                    model,
                    Some(&TrainConfig {
                        tau_train,
                        ..base.clone()
                    }),
                    &path,
                )?;
                rec.record(path);
            }
        }
    }
    rec.write("grid.csv", grid_csv)?;
    rec.write("windows.csv", windows_csv)?;
    let window = (a.task == Task::Series).then_some(window);
    let seed = (a.seeds.len() == 1).then(|| a.seeds[0]);
    rec.finish(
        json!({
            "task": a.task,
            "train_taus": a.train_taus,
            "infer_taus": a.infer_taus,
            "seeds": a.seeds,
            "floor_margin": a.floor_margin,
            "train": train_config(a.task, a.train_taus[0], 0, &a.hyper),
            "layer_sizes": arch.layer_sizes(),
            "t_steps": arch.t_steps(),
            "dataset": data_json(&a.data, window),
        }),
        seed,
    )?;
    Ok(())
}

fn write_svg(rec: &mut RunRecorder, name: &str, title: &str, y_label: &str, bars: &[Bar]) -> Result<PathBuf, CliError> {
    rec.write(name, bar_chart(title, y_label, bars))
}

fn cmd_weights(a: WeightsArgs, argv: &[String]) -> Result<(), CliError> {
    if a.bins < 3 {
        return Err(CliError::Usage(format!("--bins must be at least 3, got {}", a.bins)));
    }
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let stats = weight_stats(&ckpt.model, a.bins, a.bound)?;
    let mut rec = RunRecorder::new(&a.out, argv)?;
    for (k, layer) in stats.layers.iter().enumerate() {
        let k = k + 1;
        rec.write(
            &format!("weights_layer{k}.csv"),
            output::histogram_csv(&layer.histogram),
        )?;
        if a.svg {
            let bars: Vec<Bar> = output::histogram_rows(&layer.histogram)
                .into_iter()
                .map(|(l, r, c)| Bar {
                    label: format!("[{l}, {r})"),
                    value: c as f64,
                })
                .collect();
            write_svg(
                &mut rec,
                &format!("weights_layer{k}.svg"),
                &format!("Layer {k} weights"),
                "count",
                &bars,
            )?;
        }
    }
    let stats_csv = output::weight_stats_csv(&stats);
    print!("{stats_csv}");
    rec.write("weight_stats.csv", stats_csv)?;
    if a.svg {
        let bars: Vec<Bar> = stats
            .layers
            .iter()
            .enumerate()
            .map(|(k, s)| Bar {
                label: format!("layer {}", k + 1),
                value: s.std,
            })
            .collect();
        write_svg(&mut rec, "weight_stats.svg", "Weight standard deviation", "std", &bars)?;
    }
    rec.finish(
        json!({ "checkpoint": a.checkpoint, "bins": a.bins, "bound": a.bound, "svg": a.svg }),
        ckpt.config.as_ref().map(|c| c.seed),
    )?;
    Ok(())
}

fn cmd_firing(a: FiringArgs, argv: &[String]) -> Result<(), CliError> {
    if a.data.data.is_none() && a.data.synthetic.is_none() {
        return Err(CliError::Usage(
            "analyze firing needs --data PATH or --synthetic N".into(),
        ));
    }
    check_increasing(&a.taus, "--taus")?;
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let task = resolve_task(a.task, &ckpt)?;
    let window = checkpoint_window(&ckpt.model, &a.data)?;
    let data = load_data(task, &a.data, window)?;
    let report = with_dataset!(&data, ds => firing_report(&ckpt.model, held_out(ds), task, &a.taus))?;

    let mut rec = RunRecorder::new(&a.out, argv)?;
    let csv = output::firing_csv(&report);
    print!("{csv}");
    rec.write("firing.csv", csv)?;
    if a.svg {
        let bars: Vec<Bar> = report
            .taus
            .iter()
            .zip(&report.rates)
            .flat_map(|(tau, rates)| {
                rates.iter().enumerate().map(move |(l, &r)| Bar {
                    label: format!("τ={} L{}", fmt_tau(*tau), l + 1),
                    value: r,
                })
            })
            .collect();
        write_svg(&mut rec, "firing.svg", "Firing rate by τ and layer", "rate", &bars)?;
    }
    rec.finish(
        json!({
            "checkpoint": a.checkpoint,
            "task": task,
            "taus": a.taus,
            "svg": a.svg,
            "dataset": data_json(&a.data, Some(window)),
        }),
        ckpt.config.as_ref().map(|c| c.seed),
    )?;
    Ok(())
}

fn cmd_convert(a: ConvertArgs, argv: &[String]) -> Result<(), CliError> {
    let rows = match a.tau {
        None => conversion_table(&DEFAULT_TAU_LADDER, a.rate)?,
        Some(tau) => match a.to {
            Direction::Hardware => {
                if tau < 1.0 {
                    return Err(CliError::Usage(format!("a discrete tau must be >= 1, got {tau}")));
                }
                vec![(tau, to_hardware_tau(tau, a.rate)?)]
            }
            Direction::Software => vec![(to_software_tau(tau, a.rate)?, tau)],
        },
    };
    let csv = output::conversion_csv(&rows);
    match (a.tau, a.to) {
        (None, _) => print!("{csv}"),
        (Some(_), Direction::Hardware) => println!("{}", f4(rows[0].1)),
        (Some(_), Direction::Software) => println!("{}", f4(rows[0].0)),
    }
    if let Some(out) = &a.out {
        let mut rec = RunRecorder::new(out, argv)?;
        rec.write("conversion.csv", csv)?;
        let direction = match a.to {
            Direction::Hardware => "hardware",
            Direction::Software => "software",
        };
        rec.finish(
            json!({ "tau": a.tau, "rate": a.rate, "to": direction, "table": a.table }),
            None,
        )?;
    }
    Ok(())
}

fn cmd_devices(a: DevicesArgs, argv: &[String]) -> Result<(), CliError> {
    let catalog = match &a.catalog {
        Some(path) => load_catalog(path)?,
        None => builtin_catalog(),
    };
    let req = match a.rate {
        Some(rate) => TaskRequirement::from_discrete(a.task, rate)?,
        None => TaskRequirement::for_task(a.task),
    };
    let verdicts = recommend_devices(&req, &catalog)?;

    let threshold = req.min_tau_s.map_or("none".to_string(), |t| format!("{} s", f4(t)));
    println!("task {}  minimum tau {threshold}", a.task);
    let width = verdicts.iter().map(|(d, _)| d.name.chars().count()).max().unwrap_or(0);
    for (d, v) in &verdicts {
        let range = if d.is_fixed_value() {
            f4(d.tau_min_s)
        } else {
            format!("{} - {}", f4(d.tau_min_s), f4(d.tau_max_s))
        };
        println!("{:<width$}  {:>22} s  {v}", d.name, range);
    }

    let mut rec = RunRecorder::new(&a.out, argv)?;
    rec.write("devices.csv", output::devices_csv(&verdicts))?;
    rec.finish(
        json!({
            "task": a.task,
            "catalog": a.catalog.as_deref().map(Path::to_path_buf),
            "rate": a.rate,
            "min_tau_s": req.min_tau_s,
        }),
        None,
    )?;
    Ok(())
}
