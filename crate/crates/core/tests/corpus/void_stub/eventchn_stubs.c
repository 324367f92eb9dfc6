#include <caml/mlvalues.h>
#include <caml/memory.h>
#include <caml/alloc.h>
#include <caml/custom.h>
#include <caml/fail.h>

CAMLprim value stub_eventchn_init(void)
{
        CAMLparam0();
        CAMLlocal1(result);
        xenevtchn_handle *xce;

        caml_enter_blocking_section();
        xce = xenevtchn_open(NULL, 0);
        caml_leave_blocking_section();

        if (xce == NULL)
                caml_failwith("open failed");

        result = caml_alloc_custom(&xenevtchn_ops, sizeof(xce), 0, 1);
        *(xenevtchn_handle **)Data_custom_val(result) = xce;
        CAMLreturn(result);
}
