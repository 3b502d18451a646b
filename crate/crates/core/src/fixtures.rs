//! Reference data for tests and demos: the ten finalized textbook-level
//! prompts from the first study, P5's textbook-level iteration chain, golden
//! pathway texts for lessons 2.5, 3.2, 4.3 and 5.1, and generators for
//! content pools and a replay of the study's prompt library.

use chrono::{DateTime, Duration, Utc};

use crate::log_engine::{CommitData, EventLog, ExecutionData, LogError, LogNode, NodeData};
use crate::prompt_library::{Level, Library, LibraryError, NewPrompt};
use crate::sampler::assign_lessons;
use crate::validator::IssueCode;

pub const AUTHORS: [&str; 10] = ["p1", "p2", "p3", "p4", "p5", "p6", "p7", "p8", "p9", "p10"];

/// Finalized textbook-level prompts, one per author, in author order.
pub const TEXTBOOK_PROMPTS: [&str; 10] = [
    "You are a high school math teacher. If you want to teach your students these questions, how would you break down each problem with meaningful hints to help them effectively learn the material? Try not to have repeated hints. Try to have a positive tone!",
    "You are a college math professor tutoring a new college student. Your plan is to create a set of hints to help the student understand the problem. Include at least 2 hints and 1 scaffold for each problem. Begin the series of hints with general hints and slowly create hints that are more specific to the problem. Avoid asking questions at the end of hints. Make sure to explain concepts and properties.",
    "You are a math tutor instructing college algebra helping a student with understanding algebra. Create hints to help the student solve the following problem. Remember that scaffolds are smaller parts of the main question that the student will answer, and hints are statements that help guide the student to think and answer a scaffold or the main question. Make the later hints more simple as the question and its hints goes on.",
    "Ignore previous instructions. You are a math teacher who is trying to explain some problems to students. When looking at each question, give the students some hints that would allow them to solve their problem. DO NOT reveal the answer. DO NOT repeat the question in your hints. DO NOT repeat information from hint to hint. In your hints, try to prioritize explaining the theory behind the topic they are learning before diving into solving into the question. Your hints can also ask the students questions. Try to be positive and helpful. In your scaffolds, try to answer smaller parts of the question. If the question is too simplistic, it's not necessary to involve scaffolds. Ensure that these scaffolds do not give away the answer to the question entirely. For scaffolds, ensure the answer type is numeric or multiple choice; avoid long input answers or string answers.",
    "You have 20 years of experience in teaching high school math and middle school math and specialized in helping special education students understand the math contents. Currently, you are working with a group of special education students. You need to add some emojis to each hints to make it interesting for students to follow. Make sure the hints are enthusiastic, easy to understand, encouraging, and interesting for students to follow.",
    "You are a great math instructor with 20 years of teaching experiences. Try to give out hints or scaffolds to students, help them understanding the underlying concepts without giving out the direct answers. Also try to explain the mathematical terms to students as 7 years old kids, make it as easy as possible for them to understand. Walk them over the entire thought process, so they can solve similar problems themselves in the future.",
    "You are a math teacher of 10 years with a deep understanding of many different mathematical concepts, but is renown for explaining how to solve problems in layman terms so that students past the 8th grade are able to understand easily. Create hints for the problems above and work through the problems, but don't give out any direct answers until the final hint. Try using leading questions instead of directly telling them what the answers are for each step.",
    "You are a college-level math instructor, who is descriptive, but concise. Please provide hints and scaffolds for these questions, but you should not in any way give away the solution to students. The difference between a hint and a scaffold is a hint is a conceptual guide to approaching the question, while a scaffold ends with a question mark \"?\" and asks the student to solve for a technical part of the question (for instance, what the simplified fraction looks like). In your hints and scaffolds, do not use any fancy jargon; please maintain a friendly, but professional demeanor. Please provide 1-3 hints and 2-5 scaffolds per question, where the first hint is a relatively broad, conceptual hint, and as you progress through each question, there are less hints and more scaffolds, making them more specific to each step of the process.\nYour goal in each hint and scaffold is to make sure the student understands a little more than they did before reading (and working through) that hint. Can you provide an explanation at each step about why the student needs to perform that step?",
    "You are a patient, friendly math tutor with 20 years of experience who wants to help students solve problems by giving them hints. Generate hints that will help a student solve the problems and also understand a general logic to the concept. Title case all the hints.\n\nFor hints, avoid questions with \"?\" and instead share what is a good way to proceed with the question. For hints, make the titles start with some actionable non-form word, such as \"Identify XX\"\n\nFor scaffolds, include specific numbers that are only applicable to the question so that students can start getting more concrete progress. For scaffolds, make the answer type to be numeric or multiple choice. Avoid long equation input answers as they are hard to type.",
    "You are a tutor for a college-level math class. Make sure to be friendly and welcoming. Your goal is to create a set of hints for questions that scaffold and come one after the other. Your hints should start off simple and should aim to guide students into the right direction as opposed to giving them the answer straight away. Start off by asking questions as hints that will help students understand what the problem is asking them. As you give more hints give students some practice problems that will help them understand what you are trying to teach them. At the end of the problem make sure to give the answer. Remember that your main goal is to teach the students and help them understand what they are being asked to do and how to do it.",
];

const P5_OPENING: &str = "You have 20 years of experience in teaching high school math and middle school math and specialized in helping special education students understand the math contents.";
const P5_AUDIENCE: &str = "Currently, you are working with a group of ELD students who have ADHD and severe learning disability to understand math.";
const P5_STYLE: &str = "Make sure the hints are enthusiastic, easy to understand, encouraging, and interesting for students to follow.";

pub const P5_CONCISE_SENTENCE: &str =
    "Make sure the hints that you give are concise which means less than 10 words for each step.";
pub const P5_MARGINALIZED_SENTENCE: &str = "They are also historically known to be marginalized.";
pub const P5_EMOJI_SENTENCE: &str =
    "You need to add some emojis to each hint to make it interesting for students to follow.";

/// P5's textbook-level chain: iterations 1 to 5 and the final prompt.
pub fn p5_chain() -> [String; 6] {
    let iteration1 = format!(
        "{P5_OPENING} {P5_AUDIENCE} {P5_CONCISE_SENTENCE} They are also easy to understand, encouraging, and interesting for students to follow. {P5_MARGINALIZED_SENTENCE}"
    );
    let iteration2 = format!("{P5_OPENING} {P5_AUDIENCE} {P5_STYLE}");
    let iteration5 = format!(
        "{P5_OPENING} Currently, you are working with a group of special education students. {P5_STYLE}"
    );
    let final_prompt = format!(
        "{P5_OPENING} Currently, you are working with a group of special education students. {P5_EMOJI_SENTENCE} {P5_STYLE}"
    );
    [
        iteration1,
        iteration2.clone(),
        iteration2.clone(),
        iteration2,
        iteration5,
        final_prompt,
    ]
}

pub fn fixture_time(offset_secs: i64) -> DateTime<Utc> {
    DateTime::from_timestamp(1_714_000_000, 0).expect("valid timestamp") + Duration::seconds(offset_secs)
}

/// P5's chain as a single log path: five executions, then the commit.
pub fn p5_chain_log() -> Result<EventLog, LogError> {
    let mut log = EventLog::new();
    let chain = p5_chain();
    let mut parent: Option<String> = None;
    for (i, body) in chain.iter().enumerate() {
        let node_id = if i < 5 { format!("p5-it{}", i + 1) } else { "p5-final".to_string() };
        let data = if i < 5 {
            NodeData::Execution(ExecutionData {
                session_id: "ses-p5".into(),
                execution_id: format!("ses-p5-x{:04}", i + 1),
                variant_label: "A".into(),
                prompt_snapshot: body.clone(),
                level: Some(Level::Textbook),
                lesson_id: None,
                provider: "mock".into(),
                k: 1,
                step_refs: Vec::new(),
                output_digests: Default::default(),
                payload_digests: Vec::new(),
                generations: 0,
                failures: 0,
            })
        } else {
            NodeData::Commit(CommitData {
                prompt_id: "prm-000005".into(),
                level: Level::Textbook,
                lesson_id: None,
                body: body.clone(),
                parent_prompt_id: None,
            })
        };
        log.append(LogNode {
            node_id: node_id.clone(),
            parent_id: parent.take(),
            author: "p5".into(),
            timestamp: fixture_time(60 * i as i64),
            data,
        })?;
        parent = Some(node_id);
    }
    Ok(log)
}

/// 59 lesson ids over nine chapters.
pub fn study_lesson_ids() -> Vec<String> {
    const PER_CHAPTER: [usize; 9] = [6, 7, 7, 6, 6, 7, 7, 6, 7];
    PER_CHAPTER
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| (1..=n).map(move |l| format!("{}.{}", c + 1, l)))
        .collect()
}

/// Authors whose borrowed or own source they cloned unchanged for their
/// first lesson.
const VERBATIM_AUTHORS: [&str; 8] = ["p1", "p2", "p3", "p4", "p5", "p6", "p7", "p9"];
/// Authors whose first lesson prompt starts from P8's textbook prompt.
const BORROWS_FROM_P8: [&str; 4] = ["p1", "p2", "p4", "p6"];

pub const STUDY_ASSIGNMENT_SEED: u64 = 2024;

/// A library shaped like the study's: ten textbook-level prompts, then one
/// lesson-level prompt per lesson, 8 of them unchanged clones. P8's prompt
/// reaches four other authors and is never upvoted.
pub fn populate_study_replay(lib: &mut Library) -> Result<(), LibraryError> {
    let mut sources = Vec::new();
    for (i, (author, body)) in AUTHORS.iter().zip(TEXTBOOK_PROMPTS).enumerate() {
        let p = lib.commit_at(NewPrompt::textbook(*author, body), fixture_time(i as i64))?;
        sources.push(p.prompt_id);
    }
    let lessons = study_lesson_ids();
    let authors: Vec<String> = AUTHORS.iter().map(|a| a.to_string()).collect();
    let assignment = assign_lessons(&lessons, &authors, STUDY_ASSIGNMENT_SEED).expect("non-empty inputs");
    let mut t = 100;
    for author in AUTHORS {
        let own = AUTHORS.iter().position(|a| *a == author).expect("known author");
        let slice = assignment.slice_for(author).unwrap_or_default();
        for (pos, lesson) in slice.iter().enumerate() {
            t += 1;
            let source = if pos == 0 && BORROWS_FROM_P8.contains(&author) { &sources[7] } else { &sources[own] };
            if pos == 0 && VERBATIM_AUTHORS.contains(&author) {
                lib.clone_prompt_at(source, author, Level::Lesson, Some(lesson), fixture_time(t))?;
            } else {
                let base = lib.get(source).expect("source exists").body.clone();
                let body = format!("{base} Focus on the objectives of lesson {lesson} and use its vocabulary.");
                lib.commit_at(NewPrompt::lesson(author, lesson.as_str(), body).with_parent(source), fixture_time(t))?;
            }
        }
    }
    for voter in ["p1", "p2", "p4"] {
        lib.upvote(&sources[2], voter)?;
    }
    lib.upvote(&sources[0], "p5")?;
    lib.upvote(&sources[4], "p9")?;
    Ok(())
}

pub fn study_replay_library() -> Library {
    let mut lib = Library::new();
    populate_study_replay(&mut lib).expect("fixture library is consistent");
    lib
}

fn problem_row(lesson: &str, index: usize) -> [String; 10] {
    let i = index;
    let (problem, step, answer, answer_type, choices) = match i % 3 {
        0 => {
            let (a, x, b) = (2 + i % 5, 1 + i % 7, i % 11);
            (
                format!("Solve for $x$: ${a}x + {b} = {}$.", a * x + b),
                "Find $x$.".to_string(),
                x.to_string(),
                "numeric",
                String::new(),
            )
        }
        1 => {
            let (m, c) = (1 + i % 5, i % 9);
            (
                format!("What is the slope of the line $y = {m}x + {c}$?"),
                "Choose the slope.".to_string(),
                m.to_string(),
                "multiple_choice",
                format!("{m}|{}|-{m}", m + 10),
            )
        }
        _ => {
            let n = 2 + i % 8;
            (
                format!("Factor $x^2 - {}$.", n * n),
                "Write the factored form.".to_string(),
                format!("(x-{n})(x+{n})"),
                "string_exact",
                String::new(),
            )
        }
    };
    [
        lesson.to_string(),
        format!("Lesson {lesson}"),
        format!("L{lesson}-P{:02}", index + 1),
        problem,
        "s1".to_string(),
        step,
        answer,
        answer_type.to_string(),
        choices,
        String::new(),
    ]
}

/// Pool CSV with `steps` single-step problems spread round-robin over the
/// given lessons.
pub fn pool_csv(lessons: &[String], steps: usize) -> String {
    let mut per_lesson: Vec<Vec<usize>> = vec![Vec::new(); lessons.len()];
    for i in 0..steps {
        per_lesson[i % lessons.len()].push(i);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(crate::content_pool::CSV_COLUMNS).expect("in-memory write");
    for (lesson, indices) in lessons.iter().zip(per_lesson) {
        for i in indices {
            w.write_record(problem_row(lesson, i)).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

/// The four lessons of the learning-gain study, 20 problems each.
pub fn eighty_step_pool_csv() -> String {
    let lessons: Vec<String> = ["2.5", "3.2", "4.3", "5.1"].iter().map(|s| s.to_string()).collect();
    pool_csv(&lessons, 80)
}

/// All 59 lessons, two problems each.
pub fn study_pool_csv() -> String {
    pool_csv(&study_lesson_ids(), 118)
}

/// Well-formed pathways in canonical text form.
pub const GOLDEN_PATHWAYS: &[(&str, &str)] = &[
    (
        "lesson_2_5_generated",
        "HINT Identify the Form :: The equation $x^2 - 5x + 6 = 0$ is a quadratic in standard form.\n\
         HINT Factor the Trinomial :: Look for two numbers that multiply to $6$ and add to $-5$.\n\
         SCAFFOLD Smaller Root :: What is the smaller solution of $x^2 - 5x + 6 = 0$? :: 2 :: numeric\n\
         SCAFFOLD Larger Root :: What is the larger solution? :: 3 :: numeric\n",
    ),
    (
        "lesson_2_5_human",
        "HINT Zero Product Property :: If a product equals zero, at least one factor must equal zero.\n\
         SCAFFOLD Factored Form :: Which factorization matches $x^2 - 5x + 6$? :: $(x-2)(x-3)$ :: multiple_choice :: $(x-2)(x-3)$|$(x+2)(x+3)$|$(x-1)(x-6)$\n\
         HINT Solve Each Factor :: Set each factor equal to zero and solve.\n",
    ),
    (
        "lesson_3_2_generated",
        "HINT Look for Restrictions :: A fraction is undefined when its denominator is zero.\n\
         SCAFFOLD Excluded Value :: For $f(x) = \\frac{1}{x-4}$, which value of $x$ makes the denominator zero? :: 4 :: numeric\n\
         HINT Write the Domain :: Every real number except the excluded value belongs to the domain.\n\
         SCAFFOLD Interval Notation :: Which interval describes the domain? :: $(-\\infty,4)\\cup(4,\\infty)$ :: multiple_choice :: $(-\\infty,4)\\cup(4,\\infty)$|$(-\\infty,4]$|$(4,\\infty)$\n",
    ),
    (
        "lesson_3_2_human",
        "HINT Square Roots :: The output of $\\sqrt{x}$ is never negative.\n\
         SCAFFOLD Smallest Output :: What is the smallest value of $g(x) = \\sqrt{x-1}$? :: 0 :: numeric\n\
         SCAFFOLD Range :: Write the range of $g$ in interval notation. :: [0,inf) :: string_exact\n",
    ),
    (
        "lesson_4_3_generated",
        "HINT Read the Scatter Plot :: Decide whether the points rise or fall from left to right.\n\
         HINT Slope Meaning :: The slope tells how much $y$ changes when $x$ increases by one.\n\
         SCAFFOLD Slope :: The line of best fit is $y = 1.5x + 20$. What is its slope? :: 1.5 :: numeric\n\
         SCAFFOLD Prediction :: Use the model to predict $y$ when $x = 10$. :: 35 :: numeric\n\
         HINT Check Reasonableness :: A prediction far outside the data range is less reliable.\n",
    ),
    (
        "lesson_4_3_human",
        "HINT Correlation :: The correlation coefficient $r$ is between $-1$ and $1$.\n\
         SCAFFOLD Strength :: Which value of $r$ shows the strongest linear relationship? :: -0.95 :: multiple_choice :: 0.2|-0.95|0.6\n",
    ),
    (
        "lesson_5_1_generated",
        "HINT Vertex Form :: A quadratic written as $f(x) = a(x-h)^2 + k$ has vertex $(h, k)$.\n\
         SCAFFOLD Find h :: For $f(x) = 2(x-3)^2 + 1$, what is $h$? :: 3 :: numeric\n\
         SCAFFOLD Find k :: What is $k$? :: 1 :: numeric\n\
         HINT Direction :: Since $a = 2$ is positive, the parabola opens upward.\n",
    ),
    (
        "lesson_5_1_human",
        "HINT Axis of Symmetry :: For $f(x) = ax^2 + bx + c$ the axis of symmetry is $x = -\\frac{b}{2a}$.\n\
         SCAFFOLD Axis :: Find the axis of symmetry of $f(x) = x^2 - 4x + 7$. :: 2 :: numeric\n\
         SCAFFOLD Minimum Value :: What is the minimum value of $f$? :: 3 :: numeric\n",
    ),
    (
        "hints_only",
        "HINT Restate the Goal :: We want the value of $x$ that makes both sides equal.\n\
         HINT Undo Addition :: Subtract $4$ from both sides.\n",
    ),
    (
        "display_math",
        "HINT Quadratic Formula :: $$x = \\frac{-b \\pm \\sqrt{b^2-4ac}}{2a}$$\n\
         SCAFFOLD Discriminant :: Compute $b^2 - 4ac$ for $x^2 + 2x - 3 = 0$. :: 16 :: numeric\n",
    ),
    (
        "escaped_dollar",
        "HINT Money :: A ticket costs \\$12 and a snack costs \\$5.\n\
         SCAFFOLD Total :: How many dollars do two tickets and one snack cost? :: 29 :: numeric\n",
    ),
    (
        "string_exact_word",
        "HINT Sign Rules :: Dividing a negative by a negative gives a positive.\n\
         SCAFFOLD Simplify :: Simplify $\\frac{-6}{-3}$ and write the result as a word. :: two :: string_exact\n",
    ),
    (
        "negative_decimal",
        "HINT Intercept :: The $y$-intercept is where the line crosses the vertical axis.\n\
         SCAFFOLD Intercept Value :: What is the $y$-intercept of $y = 2x - 4.25$? :: -4.25 :: numeric\n",
    ),
    (
        "twelve_items",
        "HINT H1 :: One.\nHINT H2 :: Two.\nHINT H3 :: Three.\nHINT H4 :: Four.\n\
         HINT H5 :: Five.\nHINT H6 :: Six.\nHINT H7 :: Seven.\nHINT H8 :: Eight.\n\
         HINT H9 :: Nine.\nHINT H10 :: Ten.\nHINT H11 :: Eleven.\n\
         SCAFFOLD S12 :: What is $6 \\times 2$? :: 12 :: numeric\n",
    ),
];

/// What a negative fixture is expected to trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expected {
    Issue(IssueCode),
    ParseErrorAt(usize),
    EmptyPathway,
}

pub const NEGATIVE_PATHWAYS: &[(&str, &str, Expected)] = &[
    (
        "essay_answer_type",
        "HINT Think :: Consider why the method works.\nSCAFFOLD Explain :: Explain your reasoning. :: because :: essay\n",
        Expected::Issue(IssueCode::InvalidAnswerType),
    ),
    (
        "answer_not_in_choices",
        "SCAFFOLD Pick :: Which is the root of $x - 4 = 0$? :: 4 :: multiple_choice :: 1|2|3\n",
        Expected::Issue(IssueCode::ChoiceMismatch),
    ),
    (
        "choices_missing",
        "SCAFFOLD Pick :: Which is the root? :: 4 :: multiple_choice\n",
        Expected::Issue(IssueCode::MissingChoices),
    ),
    (
        "empty_choice",
        "SCAFFOLD Pick :: Which is the root? :: 4 :: multiple_choice :: 4||5\n",
        Expected::Issue(IssueCode::EmptyChoice),
    ),
    (
        "unclosed_inline_math",
        "HINT Solve :: solve $x+1\n",
        Expected::Issue(IssueCode::UnbalancedMath),
    ),
    (
        "mismatched_display_math",
        "HINT Formula :: $$x = 1$ is the answer.\n",
        Expected::Issue(IssueCode::UnbalancedMath),
    ),
    (
        "word_for_numeric",
        "SCAFFOLD Count :: How many roots are there? :: two :: numeric\n",
        Expected::Issue(IssueCode::NonNumericAnswer),
    ),
    (
        "unknown_line_kind",
        "HINT Start :: Read the problem.\nNOTE remember to check units\n",
        Expected::ParseErrorAt(2),
    ),
    (
        "scaffold_without_answer",
        "HINT Start :: Read the problem.\nHINT Next :: Isolate $x$.\nSCAFFOLD Solve :: What is $x$?\n",
        Expected::ParseErrorAt(3),
    ),
    ("blank_text", "  \n\n", Expected::EmptyPathway),
];
