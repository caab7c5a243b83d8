//! Portable queue library shipped with every bundle.

pub const QUEUE_H: &str = r#"#ifndef SDF_QUEUE_H
#define SDF_QUEUE_H

#include <stdint.h>

/* Fixed-capacity ring buffer of tokens; a token is `width` doubles. */
typedef struct {
    double *buf;
    uint32_t width;
    uint32_t cap;
    uint32_t head;
    uint32_t count;
    const char *name;
} sdf_queue;

void sdf_fail(const char *what, const char *name);

#ifdef SDF_NO_ASSERTS
#define SDF_CHECK(cond, what, name) ((void)0)
#else
#define SDF_CHECK(cond, what, name) ((cond) ? (void)0 : sdf_fail((what), (name)))
#endif

void sdf_queue_init(sdf_queue *q, double *buf, uint32_t width, uint32_t cap, const char *name);
void sdf_enqueue(sdf_queue *q, const double *token);
void sdf_dequeue(sdf_queue *q, double *token);
uint32_t sdf_queue_count(const sdf_queue *q);

#define enqueue(q, token) sdf_enqueue(&(q), (token))
#define dequeue(q, token) sdf_dequeue(&(q), (token))

/* Numeric helpers shared by the actor step functions. */
double sdf_q_i32(double x);
double sdf_q_bool(double x);
double sdf_lookup(const double *bp, const double *table, int n, double u);

#define SDF_MODE_NORMAL 0
#define SDF_MODE_ENABLED 1
#define SDF_MODE_TRIGGERED 2
double sdf_enable(int mode, double ctrl, double parent, double *prev);

#endif
"#;

pub const QUEUE_C: &str = r#"#include <stdio.h>
#include <stdlib.h>

#include "sdf_queue.h"

void sdf_fail(const char *what, const char *name)
{
    fprintf(stderr, "sdf: %s on %s\n", what, name);
    abort();
}

void sdf_queue_init(sdf_queue *q, double *buf, uint32_t width, uint32_t cap, const char *name)
{
    q->buf = buf;
    q->width = width;
    q->cap = cap;
    q->head = 0;
    q->count = 0;
    q->name = name;
}

void sdf_enqueue(sdf_queue *q, const double *token)
{
    uint32_t slot, i;
    SDF_CHECK(q->count < q->cap, "overflow", q->name);
    slot = (q->head + q->count) % q->cap;
    for (i = 0; i < q->width; i++) {
        q->buf[slot * q->width + i] = token[i];
    }
    q->count++;
}

void sdf_dequeue(sdf_queue *q, double *token)
{
    uint32_t i;
    SDF_CHECK(q->count > 0, "underflow", q->name);
    for (i = 0; i < q->width; i++) {
        token[i] = q->buf[q->head * q->width + i];
    }
    q->head = (q->head + 1) % q->cap;
    q->count--;
}

uint32_t sdf_queue_count(const sdf_queue *q)
{
    return q->count;
}

double sdf_q_i32(double x)
{
    if (x != x) {
        return 0.0;
    }
    if (x >= 2147483647.0) {
        return 2147483647.0;
    }
    if (x <= -2147483648.0) {
        return -2147483648.0;
    }
    return (double)(int32_t)x;
}

double sdf_q_bool(double x)
{
    return x != 0.0 ? 1.0 : 0.0;
}

double sdf_lookup(const double *bp, const double *table, int n, double u)
{
    int i = 0;
    if (!(u > bp[0])) {
        return table[0];
    }
    if (u >= bp[n - 1]) {
        return table[n - 1];
    }
    while (i + 2 < n && u >= bp[i + 1]) {
        i++;
    }
    return table[i] + (u - bp[i]) * (table[i + 1] - table[i]) / (bp[i + 1] - bp[i]);
}

double sdf_enable(int mode, double ctrl, double parent, double *prev)
{
    int en;
    if (parent == 0.0) {
        return 0.0;
    }
    switch (mode) {
    case SDF_MODE_ENABLED:
        en = ctrl > 0.0;
        break;
    case SDF_MODE_TRIGGERED:
        en = ctrl > 0.0 && !(*prev > 0.0);
        break;
    default:
        en = 1;
        break;
    }
    *prev = ctrl;
    return en ? 1.0 : 0.0;
}
"#;
